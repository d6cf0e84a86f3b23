//! LO-RANSAC with two-point hypotheses and optimal non-minimal refits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{PoseError, Result};
use crate::geom::{
    cheirality_select, epipolar_residual, sampson_distance, validate_points, Correspondence,
    PlanarPose,
};
use crate::minimal::solve_two_point;
use crate::optimal::{build_design, solve_optimal, OptimalOptions};

/// Refits per local optimization; stops early once the inlier count stalls.
const LO_MAX_STEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    /// Sampson distance threshold in squared normalized-coordinate units.
    pub threshold: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub seed: u64,
    pub lo_enabled: bool,
    /// Fraction of the fit set held out for candidate selection, in `[0, 0.5]`.
    pub holdout_fraction: f64,
    pub min_inliers: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            threshold: 1e-6,
            max_iterations: 1000,
            confidence: 0.999,
            seed: 0,
            lo_enabled: true,
            holdout_fraction: 0.05,
            min_inliers: 5,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return Err(PoseError::InvalidInput("threshold must be positive".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(PoseError::InvalidInput(
                "confidence must lie in (0, 1)".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(PoseError::InvalidInput(
                "max_iterations must be positive".into(),
            ));
        }
        if !(0.0..=0.5).contains(&self.holdout_fraction) {
            return Err(PoseError::InvalidInput(
                "holdout_fraction must lie in [0, 0.5]".into(),
            ));
        }
        if self.min_inliers == 0 {
            return Err(PoseError::InvalidInput(
                "min_inliers must be positive".into(),
            ));
        }
        Ok(())
    }

    fn optimal_options(&self) -> OptimalOptions {
        OptimalOptions {
            holdout_fraction: self.holdout_fraction,
            ..OptimalOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RansacResult {
    pub pose: PlanarPose,
    pub inlier_mask: Vec<bool>,
    pub iterations_run: usize,
    /// Sum of squared algebraic residuals of the inliers under the unit-normalized model.
    pub final_cost: f64,
    pub solver_failures: usize,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|b| **b).count()
    }
}

#[derive(Debug, Clone)]
struct Model {
    pose: PlanarPose,
    mask: Vec<bool>,
    count: usize,
}

fn score(pose: &PlanarPose, points: &[Correspondence], threshold: f64) -> Model {
    let e = pose.essential();
    let mask: Vec<bool> = points
        .iter()
        .map(|c| sampson_distance(&e, c) <= threshold)
        .collect();
    let count = mask.iter().filter(|b| **b).count();
    Model {
        pose: *pose,
        mask,
        count,
    }
}

fn inliers_of(points: &[Correspondence], mask: &[bool]) -> Vec<Correspondence> {
    points
        .iter()
        .zip(mask)
        .filter_map(|(c, m)| m.then_some(*c))
        .collect()
}

/// Iterations needed to draw one all-inlier pair with the given confidence.
fn adaptive_bound(inliers: usize, n: usize, confidence: f64, cap: usize) -> usize {
    let w = inliers as f64 / n as f64;
    let p_good = w * w;
    if p_good >= 1.0 {
        return 1;
    }
    if p_good <= 0.0 {
        return cap;
    }
    let k = (1.0 - confidence).ln() / (1.0 - p_good).ln();
    if !k.is_finite() || k >= cap as f64 {
        cap
    } else {
        (k.ceil() as usize).max(1)
    }
}

/// Refits on the inliers with the optimal solver; keeps whichever of the
/// refit and the incoming model has more inliers.
fn refit(
    points: &[Correspondence],
    model: Model,
    cfg: &RansacConfig,
    failures: &mut usize,
    steps: usize,
) -> Model {
    let mut current = model;
    for _ in 0..steps {
        if current.count < 3 {
            break;
        }
        let inliers = inliers_of(points, &current.mask);
        let pose = match solve_optimal(&inliers, &cfg.optimal_options()) {
            Ok((pose, _)) => pose,
            Err(_) => {
                *failures += 1;
                break;
            }
        };
        let candidate = score(&pose, points, cfg.threshold);
        if candidate.count > current.count {
            current = candidate;
        } else {
            if candidate.count == current.count {
                current = candidate;
            }
            break;
        }
    }
    current
}

/// Final least-squares fits on the inlier set until it stops changing. A fit
/// is accepted as long as it keeps at least `floor` inliers, the count of the
/// best minimal hypothesis.
fn polish(
    points: &[Correspondence],
    model: Model,
    floor: usize,
    cfg: &RansacConfig,
    failures: &mut usize,
) -> Model {
    let mut current = model;
    for _ in 0..LO_MAX_STEPS {
        if current.count < 3 {
            break;
        }
        let inliers = inliers_of(points, &current.mask);
        let pose = match solve_optimal(&inliers, &cfg.optimal_options()) {
            Ok((pose, _)) => pose,
            Err(_) => {
                *failures += 1;
                break;
            }
        };
        let candidate = score(&pose, points, cfg.threshold);
        if candidate.count < floor {
            break;
        }
        let settled = candidate.mask == current.mask;
        current = candidate;
        if settled {
            break;
        }
    }
    current
}

/// Robust planar pose.
///
/// Draws seeded 2-point samples, scores every hypothesis by the number of
/// correspondences within `cfg.threshold` Sampson distance, and on each new
/// best runs a local optimization with [`solve_optimal`] on its inliers. The
/// loop ends at `cfg.max_iterations` or when the adaptive bound for
/// `cfg.confidence` is reached; the winner is then refit on its inlier set
/// until the set stops changing.
pub fn ransac_estimate(points: &[Correspondence], cfg: &RansacConfig) -> Result<RansacResult> {
    validate_points(points, 2)?;
    cfg.validate()?;
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut best: Option<Model> = None;
    let mut best_minimal = 0usize;
    let mut failures = 0usize;
    let mut bound = cfg.max_iterations;
    let mut iterations = 0usize;

    while iterations < bound {
        iterations += 1;
        let sample = rand::seq::index::sample(&mut rng, n, 2);
        let (i, j) = (sample.index(0), sample.index(1));
        let poses = match solve_two_point(&points[i], &points[j]) {
            Ok(p) if !p.is_empty() => p,
            _ => {
                failures += 1;
                continue;
            }
        };
        // ±t share the same Sampson distances, so score one of each pair
        for pose in poses.iter().step_by(2) {
            let model = score(pose, points, cfg.threshold);
            best_minimal = best_minimal.max(model.count);
            let best_count = best.as_ref().map_or(0, |b| b.count);
            if model.count <= best_count {
                continue;
            }
            let model = if cfg.lo_enabled {
                refit(points, model, cfg, &mut failures, LO_MAX_STEPS)
            } else {
                model
            };
            bound = adaptive_bound(model.count, n, cfg.confidence, cfg.max_iterations)
                .max(iterations)
                .min(cfg.max_iterations);
            best = Some(model);
        }
    }

    let Some(mut best) = best else {
        return Err(PoseError::RobustFailure {
            best_inliers: 0,
            required: cfg.min_inliers,
            iterations,
            solver_failures: failures,
        });
    };

    best = polish(points, best, best_minimal, cfg, &mut failures);

    if best.count < cfg.min_inliers {
        return Err(PoseError::RobustFailure {
            best_inliers: best.count,
            required: cfg.min_inliers,
            iterations,
            solver_failures: failures,
        });
    }

    let inliers = inliers_of(points, &best.mask);
    let pose = cheirality_select(&[best.pose, best.pose.flipped()], &inliers)
        .expect("two candidates supplied");
    let final_cost = if inliers.len() >= 3 {
        build_design(&inliers)?.unit_cost(&pose)
    } else {
        let e = pose.essential();
        inliers
            .iter()
            .map(|c| epipolar_residual(&e, c).powi(2))
            .sum()
    };
    Ok(RansacResult {
        pose,
        inlier_mask: best.mask,
        iterations_run: iterations,
        final_cost,
        solver_failures: failures,
    })
}

/// `max(1, ⌊fraction · n⌋)` for a positive fraction, zero otherwise.
pub fn holdout_size(n: usize, fraction: f64) -> usize {
    if !(fraction > 0.0) || n == 0 {
        return 0;
    }
    ((fraction * n as f64).floor() as usize).clamp(1, n)
}

/// Splits `0..n` into fit and hold-out indices. Hold-out points are spread
/// evenly over the input order; no hold-out is taken if fewer than `min_fit`
/// points would remain.
pub fn split_holdout(n: usize, fraction: f64, min_fit: usize) -> (Vec<usize>, Vec<usize>) {
    let k = holdout_size(n, fraction);
    if k == 0 || n - k < min_fit {
        return ((0..n).collect(), Vec::new());
    }
    let step = n as f64 / k as f64;
    let held: Vec<usize> = (0..k)
        .map(|j| (((j as f64 + 0.5) * step).floor() as usize).min(n - 1))
        .collect();
    let mut is_held = vec![false; n];
    for &h in &held {
        is_held[h] = true;
    }
    let fit = (0..n).filter(|&i| !is_held[i]).collect();
    (fit, held)
}

/// Index of the candidate with the smallest sum of squared algebraic
/// residuals on `holdout`, or of the smallest in-sample cost when the hold-out
/// is empty. Ties go to the earlier candidate.
pub fn select_by_holdout_index(
    candidates: &[(PlanarPose, f64)],
    holdout: &[Correspondence],
) -> Option<usize> {
    let key = |(pose, cost): &(PlanarPose, f64)| -> f64 {
        if holdout.is_empty() {
            *cost
        } else {
            let e = pose.essential();
            holdout
                .iter()
                .map(|c| epipolar_residual(&e, c).powi(2))
                .sum()
        }
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, cand) in candidates.iter().enumerate() {
        let k = key(cand);
        if best.is_none_or(|(_, bk)| k < bk) {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| i)
}

/// Candidate pose chosen by [`select_by_holdout_index`].
///
/// # Panics
///
/// If `candidates` is empty.
pub fn select_by_holdout(
    candidates: &[(PlanarPose, f64)],
    holdout: &[Correspondence],
) -> PlanarPose {
    let i = select_by_holdout_index(candidates, holdout).expect("candidates must be non-empty");
    candidates[i].0
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn project(pose: &PlanarPose, x: Vector3<f64>) -> Correspondence {
        let x2 = pose.rotation() * x + pose.translation();
        Correspondence::new(x.x / x.z, x.y / x.z, x2.x / x2.z, x2.y / x2.z)
    }

    #[test]
    fn holdout_sizes() {
        assert_eq!(holdout_size(100, 0.05), 5);
        assert_eq!(holdout_size(10, 0.05), 1);
        assert_eq!(holdout_size(10, 0.0), 0);
        let (fit, held) = split_holdout(100, 0.05, 3);
        assert_eq!(held.len(), 5);
        assert_eq!(fit.len(), 95);
        let (fit, held) = split_holdout(3, 0.05, 3);
        assert!(held.is_empty());
        assert_eq!(fit.len(), 3);
    }

    #[test]
    fn split_is_a_partition() {
        for n in 1..60 {
            for frac in [0.01, 0.05, 0.2, 0.5] {
                let (fit, held) = split_holdout(n, frac, 1);
                let mut all: Vec<usize> = fit.iter().chain(&held).copied().collect();
                all.sort_unstable();
                assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn holdout_selection() {
        let truth = PlanarPose::from_degrees(4.0, 85.0);
        let other = PlanarPose::from_degrees(-10.0, 30.0);
        let held = vec![
            project(&truth, Vector3::new(0.2, 0.3, 3.0)),
            project(&truth, Vector3::new(-0.4, -0.1, 5.0)),
        ];
        assert_eq!(select_by_holdout(&[(truth, 5.0)], &held), truth);
        assert_eq!(
            select_by_holdout(&[(other, 0.0), (truth, 9.0)], &held),
            truth
        );
        // empty hold-out falls back to in-sample cost
        assert_eq!(select_by_holdout(&[(other, 0.0), (truth, 9.0)], &[]), other);
        assert_eq!(select_by_holdout_index(&[], &held), None);
    }

    #[test]
    fn adaptive_bound_collapses_without_outliers() {
        assert_eq!(adaptive_bound(100, 100, 0.99, 1000), 1);
        assert_eq!(adaptive_bound(0, 100, 0.99, 1000), 1000);
        // w = 0.5: ln(0.01)/ln(0.75) ≈ 16.008
        assert_eq!(adaptive_bound(50, 100, 0.99, 1000), 17);
    }

    #[test]
    fn config_validation() {
        assert!(RansacConfig::default().validate().is_ok());
        let bad = RansacConfig {
            threshold: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RansacConfig {
            confidence: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RansacConfig {
            holdout_fraction: 0.7,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn too_few_points_fail() {
        let c = Correspondence::new(0.1, 0.2, 0.3, 0.4);
        assert!(matches!(
            ransac_estimate(&[c], &RansacConfig::default()),
            Err(PoseError::NotEnoughPoints { .. })
        ));
    }

    #[test]
    fn degenerate_data_is_a_robust_failure() {
        let pts: Vec<_> = (0..10)
            .map(|i| Correspondence::new(0.01 * i as f64, 0.0, 0.02 * i as f64, 0.0))
            .collect();
        assert!(matches!(
            ransac_estimate(&pts, &RansacConfig::default()),
            Err(PoseError::RobustFailure { .. })
        ));
    }
}
