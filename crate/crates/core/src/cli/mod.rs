//! Command-line front end: `solve`, `bench`, `trajectory` and `synth`.
//!
//! Failures are reported on stderr as a JSON object with `code` and
//! `message` fields. Exit codes: 0 success, 2 invalid input or parse error,
//! 3 degenerate data, 4 robust estimation failure, 5 no solution or internal
//! error.

pub mod calib;
pub mod io;
pub mod trajectory;

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::PoseError;
use crate::geom::{Correspondence, PlanarPose};
use crate::optimal::{
    build_design, natural_branch, solve_linear_planar, solve_optimal, OptimalOptions,
};
use crate::robust::{ransac_estimate, RansacConfig};
use crate::synth::{
    generate_scene, run_hill_sweep_with, run_noise_sweep_with, run_stability_test, SceneConfig,
    SweepOptions, SweepRow, SWEEP_CSV_HEADER,
};
use calib::StereoCalibration;
use trajectory::{
    empirical_cdf, run_trajectory, PairsFile, TrajectoryOptions, TRAJECTORY_CSV_HEADER,
};

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_ROBUST: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

pub fn error_code(e: &PoseError) -> &'static str {
    match e {
        PoseError::InvalidInput(_) | PoseError::NotEnoughPoints { .. } => "invalid_input",
        PoseError::Degenerate(_) | PoseError::DegenerateSample => "degenerate",
        PoseError::RobustFailure { .. } => "robust_failure",
        PoseError::NoSolution => "no_solution",
        PoseError::Generation(_) => "generation_failed",
    }
}

pub fn exit_code(e: &PoseError) -> i32 {
    match e {
        PoseError::InvalidInput(_) | PoseError::NotEnoughPoints { .. } => EXIT_INVALID,
        PoseError::Degenerate(_) | PoseError::DegenerateSample => EXIT_DEGENERATE,
        PoseError::RobustFailure { .. } => EXIT_ROBUST,
        PoseError::NoSolution | PoseError::Generation(_) => EXIT_INTERNAL,
    }
}

#[derive(Debug)]
struct CliError {
    code: &'static str,
    exit: i32,
    message: String,
}

impl From<PoseError> for CliError {
    fn from(e: PoseError) -> Self {
        Self {
            code: error_code(&e),
            exit: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: "io_error",
            exit: EXIT_INVALID,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "planar-pose",
    version,
    about = "Relative pose of two cameras moving on a plane"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the pose from a correspondence CSV.
    Solve(SolveArgs),
    /// Accuracy and stability experiments on synthetic scenes.
    Bench {
        #[command(subcommand)]
        kind: BenchKind,
    },
    /// Robust pose per consecutive pair and the concatenated path.
    Trajectory(TrajectoryArgs),
    /// Write a synthetic correspondence set as CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Optimal,
    Linear,
    Ransac,
}

#[derive(Debug, Args)]
struct RansacArgs {
    /// Sampson inlier threshold in squared normalized units.
    #[arg(long, default_value_t = 1e-6)]
    threshold: f64,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 0.999)]
    confidence: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disable local-optimization refits.
    #[arg(long)]
    no_lo: bool,
    #[arg(long, default_value_t = 5)]
    min_inliers: usize,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Correspondence CSV, or `-` for stdin.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Optimal)]
    method: MethodArg,
    /// Camera intrinsics JSON; required for pixel input.
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Fraction of points held out for candidate selection.
    #[arg(long)]
    holdout: Option<f64>,
    #[command(flatten)]
    ransac: RansacArgs,
}

#[derive(Debug, Args)]
struct SweepCommon {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record median solve time (not reproducible run to run).
    #[arg(long)]
    timing: bool,
    /// Ignore the sign of the translation when measuring its error.
    #[arg(long)]
    sign_agnostic: bool,
    /// Output file; stdout if absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BenchKind {
    /// Error versus point count for several noise levels.
    Noise {
        #[arg(long, value_delimiter = ',', default_values_t = vec![10, 20, 50, 100, 200])]
        points: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0])]
        sigmas: Vec<f64>,
        #[command(flatten)]
        common: SweepCommon,
    },
    /// Error versus point count when the motion climbs a slope.
    Hill {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 3.0])]
        steepness: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![10, 20, 50, 100, 200])]
        points: Vec<usize>,
        #[command(flatten)]
        common: SweepCommon,
    },
    /// Histogram of log10 rotation error on noise-free scenes.
    Stability {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct TrajectoryArgs {
    /// JSON file with a `pairs` array.
    input: PathBuf,
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    holdout: f64,
    /// Fold estimated yaw beyond ±90° back toward zero.
    #[arg(long)]
    continuous_path: bool,
    #[arg(long)]
    sign_agnostic: bool,
    /// Write error CDFs (needs ground truth in the pairs file).
    #[arg(long)]
    errors_out: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    ransac: RansacArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// Pixel noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    steepness: f64,
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit pixel columns instead of normalized ones.
    #[arg(long)]
    pixels: bool,
    /// Write the ground-truth pose and inlier labels as JSON.
    #[arg(long)]
    gt_out: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Rounds to 15 significant digits so printed values are stable across
/// platforms.
pub fn round_sig15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

fn read_input(path: &Path) -> CliResult<String> {
    let mut s = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut s)?;
    } else {
        s = std::fs::read_to_string(path).map_err(|e| CliError {
            code: "io_error",
            exit: EXIT_INVALID,
            message: format!("{}: {e}", path.display()),
        })?;
    }
    Ok(s)
}

fn load_calib(path: Option<&PathBuf>) -> CliResult<Option<StereoCalibration>> {
    Ok(match path {
        Some(p) => Some(StereoCalibration::load(p)?),
        None => None,
    })
}

fn open_output<'a>(
    path: Option<&PathBuf>,
    stdout: &'a mut dyn Write,
) -> CliResult<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn ransac_config(args: &RansacArgs, holdout: f64) -> RansacConfig {
    RansacConfig {
        threshold: args.threshold,
        max_iterations: args.max_iterations,
        confidence: args.confidence,
        seed: args.seed,
        lo_enabled: !args.no_lo,
        holdout_fraction: holdout,
        min_inliers: args.min_inliers,
    }
}

fn pose_json(pose: &PlanarPose) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    m.insert("alpha_deg".into(), json!(round_sig15(pose.alpha_deg())));
    m.insert("beta_deg".into(), json!(round_sig15(pose.beta_deg())));
    let e: Vec<f64> = pose.essential().e.iter().map(|v| round_sig15(*v)).collect();
    m.insert("essential".into(), json!(e));
    m
}

fn solve(args: &SolveArgs, out: &mut dyn Write) -> CliResult<()> {
    let calib = load_calib(args.calib.as_ref())?;
    let text = read_input(&args.input)?;
    let points = io::read_correspondences(text.as_bytes(), calib.as_ref())?;

    let mut obj;
    match args.method {
        MethodArg::Optimal => {
            let opts = OptimalOptions {
                holdout_fraction: args.holdout.unwrap_or(0.0),
                ..OptimalOptions::default()
            };
            let (pose, diag) = solve_optimal(&points, &opts)?;
            obj = pose_json(&pose);
            obj.insert("method".into(), json!("optimal"));
            obj.insert("cost".into(), json!(round_sig15(diag.cost)));
            obj.insert("unit_cost".into(), json!(round_sig15(diag.unit_cost)));
            obj.insert("candidates_evaluated".into(), json!(diag.candidates.len()));
            obj.insert("branch".into(), json!(diag.selected_branch.name()));
        }
        MethodArg::Linear => {
            let pose = solve_linear_planar(&points)?;
            obj = pose_json(&pose);
            insert_costs(&mut obj, &points, &pose)?;
            obj.insert("method".into(), json!("linear"));
            obj.insert("candidates_evaluated".into(), json!(1));
        }
        MethodArg::Ransac => {
            let cfg = ransac_config(
                &args.ransac,
                args.holdout
                    .unwrap_or(RansacConfig::default().holdout_fraction),
            );
            let res = ransac_estimate(&points, &cfg)?;
            let inliers: Vec<Correspondence> = points
                .iter()
                .zip(&res.inlier_mask)
                .filter(|(_, m)| **m)
                .map(|(c, _)| *c)
                .collect();
            obj = pose_json(&res.pose);
            insert_costs(&mut obj, &inliers, &res.pose)?;
            obj.insert("method".into(), json!("ransac"));
            obj.insert("candidates_evaluated".into(), json!(res.iterations_run));
            obj.insert("inliers".into(), json!(res.inlier_count()));
            let idx: Vec<usize> = res
                .inlier_mask
                .iter()
                .enumerate()
                .filter(|(_, m)| **m)
                .map(|(i, _)| i)
                .collect();
            obj.insert("inlier_indices".into(), json!(idx));
            obj.insert("solver_failures".into(), json!(res.solver_failures));
        }
    }
    serde_json::to_writer_pretty(&mut *out, &obj)
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

/// Cost of `pose` in the branch its own parameters fall in.
fn insert_costs(
    obj: &mut serde_json::Map<String, serde_json::Value>,
    points: &[Correspondence],
    pose: &PlanarPose,
) -> CliResult<()> {
    let d = build_design(points)?;
    let branch = natural_branch(pose);
    obj.insert(
        "cost".into(),
        json!(round_sig15(d.branch_cost(pose, branch))),
    );
    obj.insert("unit_cost".into(), json!(round_sig15(d.unit_cost(pose))));
    obj.insert("branch".into(), json!(branch.name()));
    Ok(())
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{}", round_sig15(v))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

pub fn write_sweep_csv(out: &mut dyn Write, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method.name(),
            r.n,
            fmt_f(r.sigma),
            fmt_f(r.steepness),
            r.trial_count,
            fmt_f(r.rot_err_med_deg),
            fmt_f(r.rot_err_mean_deg),
            fmt_f(r.trans_err_med_deg),
            fmt_f(r.trans_err_mean_deg),
            fmt_opt(r.time_us_med),
        )?;
    }
    Ok(())
}

fn sweep_options(c: &SweepCommon) -> SweepOptions {
    SweepOptions {
        trials: c.trials,
        seed: c.seed,
        timing: c.timing,
        sign_agnostic: c.sign_agnostic,
    }
}

fn bench(kind: &BenchKind, stdout: &mut dyn Write) -> CliResult<()> {
    let invalid = |m: &str| CliError::from(PoseError::InvalidInput(m.into()));
    match kind {
        BenchKind::Noise {
            points,
            sigmas,
            common,
        } => {
            if points.iter().any(|&n| n < 2) || sigmas.iter().any(|s| !(*s >= 0.0)) {
                return Err(invalid(
                    "point counts must be at least 2 and sigmas non-negative",
                ));
            }
            let rows = run_noise_sweep_with(points, sigmas, &sweep_options(common));
            let mut out = open_output(common.output.as_ref(), stdout)?;
            write_sweep_csv(&mut out, &rows)?;
            out.flush()?;
        }
        BenchKind::Hill {
            steepness,
            points,
            common,
        } => {
            if points.iter().any(|&n| n < 2) || steepness.iter().any(|s| !(*s >= 0.0 && *s < 90.0))
            {
                return Err(invalid(
                    "point counts must be at least 2 and steepness in [0, 90)",
                ));
            }
            let rows = run_hill_sweep_with(steepness, points, &sweep_options(common));
            let mut out = open_output(common.output.as_ref(), stdout)?;
            write_sweep_csv(&mut out, &rows)?;
            out.flush()?;
        }
        BenchKind::Stability {
            trials,
            seed,
            output,
        } => {
            let report = run_stability_test(*trials, *seed);
            let h = &report.histogram;
            let mut out = open_output(output.as_ref(), stdout)?;
            writeln!(out, "log10_err_lo,log10_err_hi,count")?;
            writeln!(out, "-inf,{},{}", fmt_f(h.lo), h.underflow)?;
            for (i, c) in h.counts.iter().enumerate() {
                let lo = h.lo + h.width * i as f64;
                writeln!(out, "{},{},{}", fmt_f(lo), fmt_f(lo + h.width), c)?;
            }
            writeln!(out, "{},inf,{}", fmt_f(h.hi()), h.overflow)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn trajectory_cmd(args: &TrajectoryArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let calib = load_calib(args.calib.as_ref())?;
    let input = PairsFile::from_json(&read_input(&args.input)?)?;
    let opts = TrajectoryOptions {
        ransac: ransac_config(&args.ransac, args.holdout),
        continuous_path: args.continuous_path,
        sign_agnostic: args.sign_agnostic,
    };
    opts.ransac.validate()?;
    let rows = run_trajectory(&input, calib.as_ref(), &opts);

    {
        let mut out = open_output(args.output.as_ref(), stdout)?;
        writeln!(out, "{}", TRAJECTORY_CSV_HEADER.join(","))?;
        for r in &rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.pair_id,
                r.status,
                fmt_opt(r.alpha_deg),
                fmt_opt(r.beta_deg),
                r.inliers.map(|v| v.to_string()).unwrap_or_default(),
                fmt_f(r.heading_deg),
                fmt_f(r.x),
                fmt_f(r.z),
                fmt_opt(r.rot_err_deg),
                fmt_opt(r.trans_err_deg),
            )?;
        }
        out.flush()?;
    }

    if let Some(path) = &args.errors_out {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "kind,error_deg,cdf")?;
        let rot: Vec<f64> = rows.iter().filter_map(|r| r.rot_err_deg).collect();
        let trans: Vec<f64> = rows.iter().filter_map(|r| r.trans_err_deg).collect();
        for (kind, errs) in [("rotation", rot), ("translation", trans)] {
            for (e, p) in empirical_cdf(&errs) {
                writeln!(w, "{kind},{},{}", fmt_f(e), fmt_f(p))?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn synth_cmd(args: &SynthArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let cfg = SceneConfig {
        num_points: args.points,
        noise_sigma_px: args.sigma,
        hill_steepness_deg: args.steepness,
        outlier_fraction: args.outliers,
        seed: args.seed,
        ..SceneConfig::default()
    };
    let scene = generate_scene(&cfg)?;
    {
        let mut out = open_output(args.output.as_ref(), stdout)?;
        if args.pixels {
            io::write_pixels(&mut out, &scene.pixel_points)?;
        } else {
            io::write_correspondences(&mut out, &scene.correspondences)?;
        }
        out.flush()?;
    }
    if let Some(path) = &args.gt_out {
        let gt = json!({
            "alpha_deg": scene.gt_pose.alpha_deg(),
            "beta_deg": scene.gt_pose.beta_deg(),
            "calibration": cfg.calibration(),
            "inlier_labels": scene.inlier_labels,
        });
        std::fs::write(
            path,
            serde_json::to_string_pretty(&gt).expect("plain json") + "\n",
        )?;
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                EXIT_INVALID
            } else {
                let _ = write!(stdout, "{rendered}");
                0
            };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a, stdout),
        Command::Bench { kind } => bench(kind, stdout),
        Command::Trajectory(a) => trajectory_cmd(a, stdout),
        Command::Synth(a) => synth_cmd(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let body = json!({ "code": e.code, "message": e.message });
            let _ = writeln!(stderr, "{body}");
            e.exit
        }
    }
}
