//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! Pass criterion numbers or name fragments as arguments to run a subset.

use std::process::ExitCode;
use std::time::Instant;

use planar_pose::geom::{angular_difference_deg, epipolar_residual, Correspondence, PlanarPose};
use planar_pose::optimal::{Branch, OptimalOptions};
use planar_pose::robust::{ransac_estimate, RansacConfig};
use planar_pose::synth::{
    generate_scene_with_rng, median, project_random_points, run_hill_sweep, run_noise_sweep,
    run_stability_test, scene_rotation_error, scene_translation_error, trial_rng, Method,
    SceneConfig, SweepRow,
};
use planar_pose::{solve_optimal, solve_two_point};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

const SEED: u64 = 20_240_611;

// 1: noise-free exactness

fn noise_free_exactness() -> Outcome {
    let report = run_stability_test(10_000, SEED);
    let failures = report.failures();
    let errs: Vec<f64> = report.errors_deg.iter().flatten().copied().collect();
    let max = errs.iter().copied().fold(0.0, f64::max);
    let med = median(&errs);
    let below = errs.iter().filter(|e| **e < 1e-4).count();
    let pass = failures == 0 && below == 10_000 && med < 1e-8 && max <= 1e-3;
    Outcome::new(
        pass,
        format!("{below}/10000 below 1e-4 deg, median {med:.3e} deg, max {max:.3e} deg, {failures} solver failures"),
    )
}

// 2: optimality against a grid-search oracle

/// Design row for `x = [cos β, sin β, sin θ, cos θ]`, θ = α + β, written out
/// from `q₂ᵀ E q₁` with the planar essential matrix.
fn oracle_row(c: &Correspondence) -> [f64; 4] {
    [c.q1y, -c.q2x * c.q1y, c.q2y * c.q1x, -c.q2y]
}

fn oracle_cost(points: &[Correspondence], beta: f64, theta: f64, fixed: usize) -> f64 {
    let x = [beta.cos(), beta.sin(), theta.sin(), theta.cos()];
    if x[fixed] == 0.0 {
        return f64::INFINITY;
    }
    let f = x[fixed];
    points
        .iter()
        .map(|c| {
            let r = oracle_row(c);
            let v = (r[0] * x[0] + r[1] * x[1] + r[2] * x[2] + r[3] * x[3]) / f;
            v * v
        })
        .sum()
}

/// Minimum of the branch cost with the coordinate `fixed` held at one, over a
/// 0.05° grid in (β, θ) followed by shrinking-pattern refinement from every
/// promising grid block.
fn grid_oracle(points: &[Correspondence], fixed: usize) -> f64 {
    const STEPS: usize = 7200;
    const BLOCK: usize = 200;
    let h = (0.05f64).to_radians();
    let mut g = [[0.0f64; 4]; 4];
    for c in points {
        let r = oracle_row(c);
        for i in 0..4 {
            for j in 0..4 {
                g[i][j] += r[i] * r[j];
            }
        }
    }
    let trig: Vec<(f64, f64)> = (0..STEPS)
        .map(|k| ((k as f64 * h).sin(), (k as f64 * h).cos()))
        .collect();
    // θ-only terms
    let quad_v: Vec<f64> = trig
        .iter()
        .map(|&(s, c)| g[2][2] * s * s + 2.0 * g[2][3] * s * c + g[3][3] * c * c)
        .collect();
    let inv_fixed2: Vec<f64> = trig
        .iter()
        .map(|&(s, c)| {
            let f = if fixed == 2 { s } else { c };
            if f == 0.0 {
                0.0
            } else {
                1.0 / (f * f)
            }
        })
        .collect();

    let nb = STEPS / BLOCK;
    let mut block_best = vec![(f64::INFINITY, 0usize, 0usize); nb * nb];
    for (bi, &(sb, cb)) in trig.iter().enumerate() {
        let quad_u = g[0][0] * cb * cb + 2.0 * g[0][1] * cb * sb + g[1][1] * sb * sb;
        let w2 = 2.0 * (g[0][2] * cb + g[1][2] * sb);
        let w3 = 2.0 * (g[0][3] * cb + g[1][3] * sb);
        for tb in 0..nb {
            let slot = &mut block_best[(bi / BLOCK) * nb + tb];
            for ti in tb * BLOCK..(tb + 1) * BLOCK {
                let (st, ct) = trig[ti];
                let j = (quad_u + w2 * st + w3 * ct + quad_v[ti]) * inv_fixed2[ti];
                if j < slot.0 && inv_fixed2[ti] > 0.0 {
                    *slot = (j, bi, ti);
                }
            }
        }
    }
    let global = block_best.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
    let mut best = f64::INFINITY;
    for &(j, bi, ti) in &block_best {
        if j.is_nan() || j > 4.0 * global {
            continue;
        }
        let mut p = (bi as f64 * h, ti as f64 * h);
        let mut cur = oracle_cost(points, p.0, p.1, fixed);
        let mut step = h;
        while step > 1e-14 {
            let mut moved = false;
            for (db, dt) in [
                (-1.0, -1.0),
                (-1.0, 0.0),
                (-1.0, 1.0),
                (0.0, -1.0),
                (0.0, 1.0),
                (1.0, -1.0),
                (1.0, 0.0),
                (1.0, 1.0),
            ] {
                let q = (p.0 + db * step, p.1 + dt * step);
                let v = oracle_cost(points, q.0, q.1, fixed);
                if v < cur {
                    cur = v;
                    p = q;
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        best = best.min(cur);
    }
    best
}

fn solver_branch_cost(points: &[Correspondence], pose: &PlanarPose, branch: Branch) -> f64 {
    let theta = pose.alpha + pose.beta;
    oracle_cost(points, pose.beta, theta, branch.fixed_index())
}

fn optimality_oracle() -> Outcome {
    let sizes = [3usize, 10, 50];
    let sigmas = [0.5, 1.0, 2.0];
    let mut worst = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    let mut instances = 0;
    for i in 0..200usize {
        let cfg = SceneConfig {
            num_points: sizes[i % 3],
            noise_sigma_px: sigmas[(i / 3) % 3],
            ..SceneConfig::default()
        };
        let mut rng = trial_rng(SEED, 2_000 + i as u64);
        let scene = generate_scene_with_rng(&cfg, &mut rng).expect("scene");
        let pts = &scene.correspondences;
        let (pose, diag) = match solve_optimal(pts, &OptimalOptions::default()) {
            Ok(r) => r,
            Err(e) => {
                violations.push(format!("#{i}: solver error {e}"));
                continue;
            }
        };
        instances += 1;
        for branch in Branch::ALL {
            let oracle = grid_oracle(pts, branch.fixed_index());
            let solver = diag
                .candidates
                .iter()
                .filter(|c| c.branch == branch)
                .map(|c| solver_branch_cost(pts, &c.pose, branch))
                .fold(f64::INFINITY, f64::min);
            let rel = (solver - oracle) / oracle.max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            if solver > oracle * (1.0 + 1e-9) {
                violations.push(format!(
                    "#{i} {}: solver {solver:.6e} > oracle {oracle:.6e}",
                    branch.name()
                ));
            }
            if branch == diag.selected_branch {
                let sel = solver_branch_cost(pts, &pose, branch);
                if sel > oracle * (1.0 + 1e-9) {
                    violations.push(format!("#{i} selected: {sel:.6e} > oracle {oracle:.6e}"));
                }
            }
        }
    }
    let pass = violations.is_empty() && instances == 200;
    let mut detail =
        format!("{instances} instances x 2 branches, worst (solver - oracle)/oracle = {worst:.3e}");
    if !violations.is_empty() {
        detail += &format!(
            "; {} violations, first: {}",
            violations.len(),
            violations[0]
        );
    }
    Outcome::new(pass, detail)
}

// 3: consistency trend

fn non_increasing(values: &[f64]) -> (bool, usize, f64) {
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for w in values.windows(2) {
        if w[1] > w[0] {
            count += 1;
            worst = worst.max((w[1] - w[0]) / w[0]);
        }
    }
    (count == 0 || (count == 1 && worst <= 0.05), count, worst)
}

fn rows_for(rows: &[SweepRow], m: Method) -> Vec<&SweepRow> {
    rows.iter().filter(|r| r.method == m).collect()
}

fn consistency_trend() -> Outcome {
    let ns = [10usize, 20, 50, 100, 200, 1000];
    let rows = run_noise_sweep(&ns, &[1.0], 500, SEED);
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [Method::Optimal, Method::Linear] {
        let r = rows_for(&rows, m);
        let rot: Vec<f64> = r.iter().map(|r| r.rot_err_med_deg).collect();
        let trans: Vec<f64> = r.iter().map(|r| r.trans_err_med_deg).collect();
        let (ok_r, nr, wr) = non_increasing(&rot);
        let (ok_t, nt, wt) = non_increasing(&trans);
        pass &= ok_r && ok_t;
        parts.push(format!(
            "{}: rot {:?} ({nr} rises, worst {:.1}%), trans {:?} ({nt} rises, worst {:.1}%)",
            m.name(),
            rot.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            wr * 100.0,
            trans.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
            wt * 100.0
        ));
    }
    // optimal never worse than linear
    let opt = rows_for(&rows, Method::Optimal);
    let lin = rows_for(&rows, Method::Linear);
    let ordered = opt.iter().zip(&lin).all(|(o, l)| {
        o.rot_err_med_deg <= l.rot_err_med_deg * 1.05
            && o.trans_err_med_deg <= l.trans_err_med_deg * 1.05
    });
    pass &= ordered;
    parts.push(format!(
        "optimal within 5% of or better than linear at every N: {ordered}"
    ));
    Outcome::new(pass, parts.join("; "))
}

// 4: planarity violation

fn planarity_violation() -> Outcome {
    let rows = run_hill_sweep(&[1.0, 3.0], &[10, 50, 200], 200, SEED);
    let opt = rows_for(&rows, Method::Optimal);
    let lin = rows_for(&rows, Method::Linear);
    let mut pass = true;
    let mut cells = Vec::new();
    for (o, l) in opt.iter().zip(&lin) {
        let ok = o.trans_err_med_deg <= l.trans_err_med_deg;
        pass &= ok;
        cells.push(format!(
            "{}deg/N={}: {:.5} vs {:.5}",
            o.steepness, o.n, o.trans_err_med_deg, l.trans_err_med_deg
        ));
    }
    Outcome::new(
        pass,
        format!(
            "median translation error optimal vs linear: {}",
            cells.join(", ")
        ),
    )
}

// 5: constraint and stationarity

fn stationarity() -> Outcome {
    let mut checked = 0usize;
    let mut worst_c: f64 = 0.0;
    let mut worst_g: f64 = 0.0;
    let mut bad = 0usize;
    let mut solver_errors = 0usize;
    for i in 0..10_000u64 {
        let mut rng = trial_rng(SEED, 50_000 + i);
        let points = if i % 2 == 0 {
            let cfg = SceneConfig {
                num_points: rng.random_range(3..=100),
                noise_sigma_px: rng.random_range(0.0..2.0),
                ..SceneConfig::default()
            };
            generate_scene_with_rng(&cfg, &mut rng)
                .expect("scene")
                .correspondences
        } else {
            let pose = PlanarPose::new(rng.random_range(-3.1..3.1), rng.random_range(-3.1..3.1));
            let n = rng.random_range(3..=100);
            let noise = rng.random_range(0.0..2e-3);
            project_random_points(&pose, n, noise, &mut rng)
        };
        let Ok((_, diag)) = solve_optimal(&points, &OptimalOptions::default()) else {
            solver_errors += 1;
            continue;
        };
        let mut g = [[0.0f64; 4]; 4];
        for c in &points {
            let r = oracle_row(c);
            for a in 0..4 {
                for b in 0..4 {
                    g[a][b] += r[a] * r[b];
                }
            }
        }
        for cand in &diag.candidates {
            let o = cand.branch.order();
            let gp = |a: usize, b: usize| g[o[a]][o[b]];
            let bvec = [-gp(0, 3), -gp(1, 3), -gp(2, 3)];
            let bnorm = bvec.iter().map(|v| v * v).sum::<f64>().sqrt();
            let y = [cand.gamma, cand.delta, cand.epsilon];
            let cost = |y: &[f64; 3]| {
                let z = [y[0], y[1], y[2], 1.0];
                let mut s = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        s += z[a] * gp(a, b) * z[b];
                    }
                }
                s
            };
            let mut grad = [0.0; 3];
            for k in 0..3 {
                let step = 1e-5 * (1.0 + y[k].abs());
                let (mut yp, mut ym) = (y, y);
                yp[k] += step;
                ym[k] -= step;
                grad[k] = (cost(&yp) - cost(&ym)) / (2.0 * step);
            }
            let normal = [2.0 * y[0], 2.0 * y[1], -2.0 * y[2]];
            let nn: f64 = normal.iter().map(|v| v * v).sum();
            let proj: f64 = grad.iter().zip(&normal).map(|(a, b)| a * b).sum::<f64>() / nn;
            let tangential = (0..3)
                .map(|k| (grad[k] - proj * normal[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            let constraint = (y[0] * y[0] + y[1] * y[1] - y[2] * y[2] - 1.0).abs();
            let gtol = 1e-6 * (1.0 + bnorm);
            worst_c = worst_c.max(constraint);
            worst_g = worst_g.max(tangential / gtol);
            if !(constraint < 1e-7 && tangential < gtol) {
                bad += 1;
            }
            checked += 1;
        }
    }
    Outcome::new(
        bad == 0 && solver_errors == 0,
        format!(
            "{checked} candidates, {bad} violations, {solver_errors} solver errors, max |constraint| {worst_c:.2e}, max gradient/tolerance {worst_g:.2e}"
        ),
    )
}

// 6: minimal solver

fn minimal_solver() -> Outcome {
    let mut missing = 0;
    let mut residual_bad = 0;
    let mut errors = 0;
    let mut worst_res: f64 = 0.0;
    for i in 0..1000u64 {
        let mut rng = trial_rng(SEED, 70_000 + i);
        let truth = PlanarPose::new(rng.random_range(-3.1..3.1), rng.random_range(-3.1..3.1));
        let pts = project_random_points(&truth, 2, 0.0, &mut rng);
        let poses = match solve_two_point(&pts[0], &pts[1]) {
            Ok(p) => p,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        let found = poses.iter().any(|p| {
            angular_difference_deg(p.alpha, truth.alpha) < 1e-8
                && angular_difference_deg(p.beta, truth.beta) < 1e-8
        });
        if !found {
            missing += 1;
        }
        for p in &poses {
            let e = p.essential();
            let r = epipolar_residual(&e, &pts[0])
                .abs()
                .max(epipolar_residual(&e, &pts[1]).abs());
            worst_res = worst_res.max(r);
            if r >= 1e-10 {
                residual_bad += 1;
            }
        }
    }
    Outcome::new(
        missing == 0 && residual_bad == 0 && errors == 0,
        format!("1000 problems: {missing} missing ground truth, {residual_bad} poses with residual >= 1e-10 (max {worst_res:.2e}), {errors} errors"),
    )
}

// 7: robust pipeline

/// Inlier threshold on the squared Sampson distance: (3σ)² for σ = 0.5 px at
/// focal length 1000.
const ROBUST_THRESHOLD: f64 = 2.25e-6;

fn robust_pipeline() -> Outcome {
    let mut good = 0;
    let mut nondeterministic = 0;
    let mut failures = 0;
    let mut errs = Vec::new();
    for i in 0..100u64 {
        let cfg = SceneConfig {
            num_points: 200,
            outlier_fraction: 0.3,
            noise_sigma_px: 0.5,
            ..SceneConfig::default()
        };
        let mut rng = trial_rng(SEED, 90_000 + i);
        let scene = generate_scene_with_rng(&cfg, &mut rng).expect("scene");
        let rcfg = RansacConfig {
            threshold: ROBUST_THRESHOLD,
            seed: i,
            ..RansacConfig::default()
        };
        let Ok(res) = ransac_estimate(&scene.correspondences, &rcfg) else {
            failures += 1;
            continue;
        };
        let again = ransac_estimate(&scene.correspondences, &rcfg).expect("rerun");
        let same = again.inlier_mask == res.inlier_mask
            && again.pose.alpha.to_bits() == res.pose.alpha.to_bits()
            && again.pose.beta.to_bits() == res.pose.beta.to_bits()
            && again.iterations_run == res.iterations_run;
        if !same {
            nondeterministic += 1;
        }
        let rot = scene_rotation_error(&scene, &res.pose);
        let trans = scene_translation_error(&scene, &res.pose, false);
        let err = rot.max(trans);
        errs.push(err);
        let tp = res
            .inlier_mask
            .iter()
            .zip(&scene.inlier_labels)
            .filter(|(a, b)| **a && **b)
            .count() as f64;
        let predicted = res.inlier_count() as f64;
        let actual = scene.inlier_labels.iter().filter(|b| **b).count() as f64;
        let precision = tp / predicted.max(1.0);
        let recall = tp / actual;
        if err < 0.5 && precision >= 0.95 && recall >= 0.95 {
            good += 1;
        }
    }
    errs.sort_by(f64::total_cmp);
    let p95 = errs.get(94).copied().unwrap_or(f64::NAN);
    Outcome::new(
        good >= 95 && nondeterministic == 0,
        format!(
            "{good}/100 trials with pose error < 0.5 deg and precision/recall >= 0.95 (95th pct error {p95:.3} deg), {failures} failures, {nondeterministic} non-reproducible"
        ),
    )
}

// 8: runtime

fn runtime() -> Outcome {
    let cfg = SceneConfig {
        num_points: 200,
        noise_sigma_px: 1.0,
        ..SceneConfig::default()
    };
    let scenes: Vec<Vec<Correspondence>> = (0..200u64)
        .map(|i| {
            let mut rng = trial_rng(SEED, 110_000 + i);
            generate_scene_with_rng(&cfg, &mut rng)
                .expect("scene")
                .correspondences
        })
        .collect();
    let opts = OptimalOptions::default();
    for s in scenes.iter().take(20) {
        let _ = solve_optimal(s, &opts);
    }
    let mut times = Vec::with_capacity(scenes.len());
    for s in &scenes {
        let t = Instant::now();
        let r = solve_optimal(s, &opts);
        times.push(t.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(r).ok();
    }
    let med = median(&times);
    Outcome::new(
        med < 1.0,
        format!("median solve time at N=200: {med:.4} ms"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("noise-free exactness", noise_free_exactness),
        ("optimality oracle", optimality_oracle),
        ("consistency trend", consistency_trend),
        ("planarity violation", planarity_violation),
        ("constraint and stationarity", stationarity),
        ("minimal solver", minimal_solver),
        ("robust pipeline", robust_pipeline),
        ("runtime", runtime),
    ];
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let selected = |k: usize, name: &str| {
        filters.is_empty()
            || filters.iter().any(|f| {
                f == &(k + 1).to_string()
                    || name.contains(f.as_str())
                    || "acceptance".contains(f.as_str())
            })
    };

    let mut failed = 0;
    let mut ran = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if !selected(k, name) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let out = run();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {} ({name}): {verdict} [{:.1}s] {}",
            k + 1,
            start.elapsed().as_secs_f64(),
            out.detail
        );
        if !out.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
