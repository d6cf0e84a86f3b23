//! Synthetic two-view scenes and the accuracy/stability sweeps built on them.
//!
//! Camera 1 sits at the origin looking down +Z with focal length 1000 px and
//! principal point (500, 500). Camera 2 is placed `baseline` units behind it
//! on the optical axis and yawed by a random angle of at most
//! `max_rotation_deg`, so the pair differs by a purely forward motion. Points
//! are drawn uniformly from the unit ball around the origin and kept only if
//! they project in front of and inside both images. Under this ordering the
//! ground-truth translation direction is `β = 90° − α`.
//!
//! A non-zero `hill_steepness_deg` pitches camera 2 about X and lifts it by
//! `baseline · tan(steepness)` along Y, so the motion follows a slope and the
//! planar model no longer holds exactly.

use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::calib::{Calibration, PixelPair};
use crate::error::{PoseError, Result};
use crate::geom::{
    direction_difference_deg, rotation_angular_error, rotation_difference_deg, rotation_x,
    rotation_y, Correspondence, PlanarPose,
};
use crate::optimal::{solve_linear_planar, solve_optimal, OptimalOptions};

const IMAGE_SIZE: f64 = 1000.0;
const RESAMPLE_BUDGET_PER_POINT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub focal: f64,
    pub principal_point: (f64, f64),
    pub baseline: f64,
    pub max_rotation_deg: f64,
    pub num_points: usize,
    pub noise_sigma_px: f64,
    pub hill_steepness_deg: f64,
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            focal: 1000.0,
            principal_point: (500.0, 500.0),
            baseline: 10.0,
            max_rotation_deg: 5.0,
            num_points: 100,
            noise_sigma_px: 0.0,
            hill_steepness_deg: 0.0,
            outlier_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0) {
            return Err(PoseError::InvalidInput("focal must be positive".into()));
        }
        if self.num_points < 2 {
            return Err(PoseError::InvalidInput("need at least 2 points".into()));
        }
        if !(self.noise_sigma_px >= 0.0) || !(self.hill_steepness_deg >= 0.0) {
            return Err(PoseError::InvalidInput(
                "noise and steepness must be non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(PoseError::InvalidInput(
                "outlier fraction must lie in [0, 1)".into(),
            ));
        }
        if !(self.baseline > 0.0) || !(self.max_rotation_deg >= 0.0) {
            return Err(PoseError::InvalidInput(
                "baseline must be positive and max rotation non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn calibration(&self) -> Calibration {
        Calibration {
            fx: self.focal,
            fy: self.focal,
            cx: self.principal_point.0,
            cy: self.principal_point.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub correspondences: Vec<Correspondence>,
    pub pixel_points: Vec<PixelPair>,
    /// Planar part of the true motion.
    pub gt_pose: PlanarPose,
    /// Full rotation of camera 2 relative to camera 1 (non-planar on a hill).
    pub gt_rotation: Matrix3<f64>,
    /// Unit translation direction, `X2 = R X1 + t`.
    pub gt_translation: Vector3<f64>,
    pub inlier_labels: Vec<bool>,
}

/// Per-trial random stream; independent of scheduling.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn generate_scene(cfg: &SceneConfig) -> Result<SyntheticScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    generate_scene_with_rng(cfg, &mut rng)
}

fn in_image(p: (f64, f64)) -> bool {
    (0.0..=IMAGE_SIZE).contains(&p.0) && (0.0..=IMAGE_SIZE).contains(&p.1)
}

/// Same as [`generate_scene`] but draws from a caller-provided stream;
/// `cfg.seed` is ignored.
pub fn generate_scene_with_rng(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Result<SyntheticScene> {
    cfg.validate()?;
    let calib = cfg.calibration();
    let max_rot = cfg.max_rotation_deg.to_radians();
    let alpha = if max_rot > 0.0 {
        rng.random_range(-max_rot..=max_rot)
    } else {
        0.0
    };
    let steep = cfg.hill_steepness_deg.to_radians();
    let rot = rotation_y(alpha) * rotation_x(-steep);
    let centre = Vector3::new(0.0, cfg.baseline * steep.tan(), -cfg.baseline);
    let t = -(rot * centre);
    let gt_translation = t.normalize();
    let gt_pose = PlanarPose::new(alpha, t.z.atan2(t.x));

    let project = |x: &Vector3<f64>| -> (f64, f64) {
        (
            calib.fx * x.x / x.z + calib.cx,
            calib.fy * x.y / x.z + calib.cy,
        )
    };

    let budget = RESAMPLE_BUDGET_PER_POINT * cfg.num_points;
    let mut attempts = 0usize;
    let mut pixel_points = Vec::with_capacity(cfg.num_points);
    while pixel_points.len() < cfg.num_points {
        attempts += 1;
        if attempts > budget {
            return Err(PoseError::Generation(format!(
                "only {} of {} points visible after {budget} draws",
                pixel_points.len(),
                cfg.num_points
            )));
        }
        let x = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if x.norm_squared() > 1.0 || x.z <= 0.0 {
            continue;
        }
        let x2 = rot * (x - centre);
        if x2.z <= 0.0 {
            continue;
        }
        let (p1, p2) = (project(&x), project(&x2));
        if !in_image(p1) || !in_image(p2) {
            continue;
        }
        pixel_points.push(PixelPair::new(p1.0, p1.1, p2.0, p2.1));
    }

    if cfg.noise_sigma_px > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma_px).expect("sigma is finite and positive");
        for p in pixel_points.iter_mut() {
            p.p1x += normal.sample(rng);
            p.p1y += normal.sample(rng);
            p.p2x += normal.sample(rng);
            p.p2y += normal.sample(rng);
        }
    }

    let mut inlier_labels = vec![true; cfg.num_points];
    let outliers = (cfg.outlier_fraction * cfg.num_points as f64).round() as usize;
    if outliers > 0 {
        for i in rand::seq::index::sample(rng, cfg.num_points, outliers).iter() {
            inlier_labels[i] = false;
            pixel_points[i].p2x = rng.random_range(0.0..IMAGE_SIZE);
            pixel_points[i].p2y = rng.random_range(0.0..IMAGE_SIZE);
        }
    }

    let correspondences = pixel_points
        .iter()
        .map(|p| p.normalize(&calib, &calib))
        .collect();
    Ok(SyntheticScene {
        correspondences,
        pixel_points,
        gt_pose,
        gt_rotation: rot,
        gt_translation,
        inlier_labels,
    })
}

/// Exact projections of random points under a general planar `pose`, with
/// isotropic Gaussian noise of `noise` (normalized units) on every coordinate.
///
/// Points lie in front of camera 1 and, whenever the two viewing volumes
/// overlap, in front of camera 2. Poses whose cameras face away from each
/// other fall back to points behind camera 2, which still satisfy the
/// epipolar constraint exactly.
pub fn project_random_points(
    pose: &PlanarPose,
    n: usize,
    noise: f64,
    rng: &mut impl Rng,
) -> Vec<Correspondence> {
    const FRONT_BUDGET: usize = 1000;
    let r = pose.rotation();
    let t = pose.translation();
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        let x = Vector3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(2.0..8.0),
        );
        let x2 = r * x + t;
        let front_only = attempts <= FRONT_BUDGET * n.max(1);
        if (front_only && x2.z < 1.0) || x2.z.abs() < 0.5 {
            continue;
        }
        let mut c = Correspondence::new(x.x / x.z, x.y / x.z, x2.x / x2.z, x2.y / x2.z);
        if noise > 0.0 {
            c.q1x += normal.sample(rng);
            c.q1y += normal.sample(rng);
            c.q2x += normal.sample(rng);
            c.q2y += normal.sample(rng);
        }
        out.push(c);
    }
    out
}

/// Rotation error of an estimate against a scene, degrees. Planar scenes use
/// the wrapped yaw difference; otherwise the full relative rotation angle.
pub fn scene_rotation_error(scene: &SyntheticScene, est: &PlanarPose) -> f64 {
    let planar = (scene.gt_rotation - scene.gt_pose.rotation()).abs().max() == 0.0;
    if planar {
        rotation_angular_error(est.alpha, scene.gt_pose.alpha)
    } else {
        rotation_difference_deg(&est.rotation(), &scene.gt_rotation)
    }
}

/// Translation direction error against a scene, degrees; `sign_agnostic`
/// folds it into `[0, 90]`.
pub fn scene_translation_error(
    scene: &SyntheticScene,
    est: &PlanarPose,
    sign_agnostic: bool,
) -> f64 {
    let e = direction_difference_deg(&est.translation(), &scene.gt_translation);
    if sign_agnostic {
        e.min(180.0 - e)
    } else {
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    Optimal,
    Linear,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Optimal => "optimal",
            Method::Linear => "linear",
        }
    }

    pub fn estimate(self, points: &[Correspondence]) -> Result<PlanarPose> {
        match self {
            Method::Optimal => solve_optimal(points, &OptimalOptions::default()).map(|(p, _)| p),
            Method::Linear => solve_linear_planar(points),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub trials: usize,
    pub seed: u64,
    /// Measure solver wall time; off keeps the output reproducible.
    pub timing: bool,
    pub sign_agnostic: bool,
}

impl SweepOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            timing: false,
            sign_agnostic: false,
        }
    }
}

/// One method on one `(N, σ, steepness)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: Method,
    pub n: usize,
    pub sigma: f64,
    pub steepness: f64,
    /// Trials in which the method returned a pose.
    pub trial_count: usize,
    pub rot_err_med_deg: f64,
    pub rot_err_mean_deg: f64,
    pub trans_err_med_deg: f64,
    pub trans_err_mean_deg: f64,
    pub time_us_med: Option<f64>,
}

pub const SWEEP_CSV_HEADER: &str = "method,N,sigma,steepness,trial_count,rot_err_med_deg,rot_err_mean_deg,trans_err_med_deg,trans_err_mean_deg,time_us_med";

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    rot: f64,
    trans: f64,
    micros: f64,
}

/// Per-trial errors of every method on one cell, in trial order.
fn run_cell(
    base: &SceneConfig,
    methods: &[Method],
    opts: &SweepOptions,
    cell: u64,
) -> Vec<Vec<Option<TrialOutcome>>> {
    let per_trial: Vec<Vec<Option<TrialOutcome>>> = (0..opts.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(opts.seed, (cell << 32) | trial as u64);
            let scene = match generate_scene_with_rng(base, &mut rng) {
                Ok(s) => s,
                Err(_) => return vec![None; methods.len()],
            };
            methods
                .iter()
                .map(|m| {
                    let start = Instant::now();
                    let est = m.estimate(&scene.correspondences).ok()?;
                    let micros = start.elapsed().as_secs_f64() * 1e6;
                    Some(TrialOutcome {
                        rot: scene_rotation_error(&scene, &est),
                        trans: scene_translation_error(&scene, &est, opts.sign_agnostic),
                        micros,
                    })
                })
                .collect()
        })
        .collect();
    // transpose to per-method
    (0..methods.len())
        .map(|k| per_trial.iter().map(|t| t[k]).collect())
        .collect()
}

fn summarize(
    method: Method,
    cfg: &SceneConfig,
    outcomes: &[Option<TrialOutcome>],
    timing: bool,
) -> SweepRow {
    let ok: Vec<TrialOutcome> = outcomes.iter().flatten().copied().collect();
    let rot: Vec<f64> = ok.iter().map(|o| o.rot).collect();
    let trans: Vec<f64> = ok.iter().map(|o| o.trans).collect();
    let time: Vec<f64> = ok.iter().map(|o| o.micros).collect();
    SweepRow {
        method,
        n: cfg.num_points,
        sigma: cfg.noise_sigma_px,
        steepness: cfg.hill_steepness_deg,
        trial_count: ok.len(),
        rot_err_med_deg: median(&rot),
        rot_err_mean_deg: mean(&rot),
        trans_err_med_deg: median(&trans),
        trans_err_mean_deg: mean(&trans),
        time_us_med: timing.then(|| median(&time)),
    }
}

fn sweep(cells: &[SceneConfig], opts: &SweepOptions) -> Vec<SweepRow> {
    let methods = [Method::Optimal, Method::Linear];
    let mut rows = Vec::with_capacity(cells.len() * methods.len());
    for (ci, cfg) in cells.iter().enumerate() {
        let per_method = run_cell(cfg, &methods, opts, ci as u64);
        for (m, outcomes) in methods.iter().zip(&per_method) {
            rows.push(summarize(*m, cfg, outcomes, opts.timing));
        }
    }
    rows
}

/// Accuracy versus point count for each noise level, planar motion.
pub fn run_noise_sweep(
    point_counts: &[usize],
    sigmas: &[f64],
    trials: usize,
    seed: u64,
) -> Vec<SweepRow> {
    run_noise_sweep_with(point_counts, sigmas, &SweepOptions::new(trials, seed))
}

pub fn run_noise_sweep_with(
    point_counts: &[usize],
    sigmas: &[f64],
    opts: &SweepOptions,
) -> Vec<SweepRow> {
    let cells: Vec<SceneConfig> = sigmas
        .iter()
        .flat_map(|&sigma| {
            point_counts.iter().map(move |&n| SceneConfig {
                num_points: n,
                noise_sigma_px: sigma,
                ..SceneConfig::default()
            })
        })
        .collect();
    sweep(&cells, opts)
}

/// Image noise used by the hill sweep, pixels.
pub const HILL_NOISE_PX: f64 = 0.5;

/// Accuracy versus point count for each hill steepness, 0.5 px noise.
pub fn run_hill_sweep(
    steepness_deg: &[f64],
    point_counts: &[usize],
    trials: usize,
    seed: u64,
) -> Vec<SweepRow> {
    run_hill_sweep_with(
        steepness_deg,
        point_counts,
        &SweepOptions::new(trials, seed),
    )
}

pub fn run_hill_sweep_with(
    steepness_deg: &[f64],
    point_counts: &[usize],
    opts: &SweepOptions,
) -> Vec<SweepRow> {
    let cells: Vec<SceneConfig> = steepness_deg
        .iter()
        .flat_map(|&s| {
            point_counts.iter().map(move |&n| SceneConfig {
                num_points: n,
                noise_sigma_px: HILL_NOISE_PX,
                hill_steepness_deg: s,
                ..SceneConfig::default()
            })
        })
        .collect();
    sweep(&cells, opts)
}

/// Per-cell paired errors, for callers that need more than the summary.
pub fn run_paired_trials(cfg: &SceneConfig, opts: &SweepOptions) -> Vec<[Option<(f64, f64)>; 2]> {
    let per_method = run_cell(cfg, &[Method::Optimal, Method::Linear], opts, 0);
    (0..opts.trials)
        .map(|i| [0, 1].map(|k| per_method[k][i].map(|o| (o.rot, o.trans))))
        .collect()
}

/// Fixed-width histogram of log10 errors with under/overflow counters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, width: f64) -> Self {
        let bins = ((hi - lo) / width).round() as usize;
        Self {
            lo,
            width,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.width * self.counts.len() as f64
    }

    pub fn add(&mut self, v: f64) {
        if v < self.lo {
            self.underflow += 1;
        } else if v >= self.hi() {
            self.overflow += 1;
        } else {
            let last = self.counts.len() - 1;
            let i = ((v - self.lo) / self.width).floor() as usize;
            self.counts[i.min(last)] += 1;
        }
    }

    /// Number of samples at or above `v` (bin resolution).
    pub fn count_at_or_above(&self, v: f64) -> usize {
        let first = (((v - self.lo) / self.width).floor().max(0.0) as usize).min(self.counts.len());
        self.counts[first..].iter().sum::<usize>() + self.overflow
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.underflow + self.overflow
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub histogram: Histogram,
    /// Rotation error in degrees per trial; `None` where the solver failed.
    pub errors_deg: Vec<Option<f64>>,
    pub point_counts: Vec<usize>,
}

impl StabilityReport {
    pub fn failures(&self) -> usize {
        self.errors_deg.iter().filter(|e| e.is_none()).count()
    }
}

/// Lower edge of the stability histogram; exact zeros land in the underflow bin.
pub const STABILITY_LOG_LO: f64 = -20.0;
pub const STABILITY_LOG_HI: f64 = 2.0;
pub const STABILITY_BIN_WIDTH: f64 = 0.5;

/// Noise-free planar scenes with N uniform in [5, 200]; histogram of the
/// log10 rotation error of the optimal solver.
pub fn run_stability_test(trials: usize, seed: u64) -> StabilityReport {
    let outcomes: Vec<(usize, Option<f64>)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial as u64);
            let n = rng.random_range(5..=200usize);
            let cfg = SceneConfig {
                num_points: n,
                ..SceneConfig::default()
            };
            let err = generate_scene_with_rng(&cfg, &mut rng)
                .ok()
                .and_then(|scene| {
                    Method::Optimal
                        .estimate(&scene.correspondences)
                        .ok()
                        .map(|p| scene_rotation_error(&scene, &p))
                });
            (n, err)
        })
        .collect();
    let mut histogram = Histogram::new(STABILITY_LOG_LO, STABILITY_LOG_HI, STABILITY_BIN_WIDTH);
    for (_, e) in &outcomes {
        match e {
            Some(e) => histogram.add(if *e > 0.0 {
                e.log10()
            } else {
                f64::NEG_INFINITY
            }),
            None => histogram.overflow += 1,
        }
    }
    StabilityReport {
        histogram,
        point_counts: outcomes.iter().map(|(n, _)| *n).collect(),
        errors_deg: outcomes.into_iter().map(|(_, e)| e).collect(),
    }
}
