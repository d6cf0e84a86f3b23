//! Pose-by-pose estimation over an image sequence and path concatenation.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::calib::{PixelPair, StereoCalibration};
use crate::error::{PoseError, Result};
use crate::geom::{
    fold_continuous_deg, rotation_angular_error_mode, rotation_y, translation_angular_error,
    Correspondence, PlanarPose,
};
use crate::robust::{ransac_estimate, RansacConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub alpha_deg: f64,
    pub beta_deg: f64,
}

/// One consecutive image pair: rows of `[x1, y1, x2, y2]`, normalized or
/// pixel coordinates depending on whether a calibration is supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInput {
    pub id: String,
    pub points: Vec<[f64; 4]>,
    #[serde(default)]
    pub gt: Option<GroundTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairsFile {
    pub pairs: Vec<PairInput>,
}

impl PairsFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| PoseError::InvalidInput(format!("pairs file: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    pub ransac: RansacConfig,
    pub continuous_path: bool,
    pub sign_agnostic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub pair_id: String,
    /// `ok`, or the error code of a failed pair.
    pub status: String,
    pub alpha_deg: Option<f64>,
    pub beta_deg: Option<f64>,
    pub inliers: Option<usize>,
    pub heading_deg: f64,
    pub x: f64,
    pub z: f64,
    pub rot_err_deg: Option<f64>,
    pub trans_err_deg: Option<f64>,
}

pub const TRAJECTORY_CSV_HEADER: [&str; 10] = [
    "pair_id",
    "status",
    "alpha_deg",
    "beta_deg",
    "inliers",
    "heading_deg",
    "x",
    "z",
    "rot_err_deg",
    "trans_err_deg",
];

/// Heading and unit-step camera positions after each step; failed steps
/// leave both unchanged.
pub fn concatenate(steps: &[Option<PlanarPose>]) -> Vec<(f64, Vector3<f64>)> {
    let mut heading = 0.0f64;
    let mut pos = Vector3::zeros();
    let mut out = Vec::with_capacity(steps.len());
    for step in steps {
        if let Some(p) = step {
            // centre of the next camera in the current frame
            let centre = -(p.rotation().transpose() * p.translation());
            pos += rotation_y(-heading) * centre;
            heading += p.alpha;
        }
        out.push((crate::geom::wrap_angle(heading).to_degrees(), pos));
    }
    out
}

fn pair_points(pair: &PairInput, calib: Option<&StereoCalibration>) -> Result<Vec<Correspondence>> {
    pair.points
        .iter()
        .map(|r| {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(PoseError::InvalidInput(format!(
                    "pair {}: non-finite value",
                    pair.id
                )));
            }
            Ok(match calib {
                Some(c) => c.normalize(&PixelPair::new(r[0], r[1], r[2], r[3])),
                None => Correspondence::new(r[0], r[1], r[2], r[3]),
            })
        })
        .collect()
}

pub fn run_trajectory(
    input: &PairsFile,
    calib: Option<&StereoCalibration>,
    opts: &TrajectoryOptions,
) -> Vec<TrajectoryRow> {
    let estimates: Vec<std::result::Result<(PlanarPose, usize), PoseError>> = input
        .pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| {
            let points = pair_points(pair, calib)?;
            let cfg = RansacConfig {
                seed: opts.ransac.seed.wrapping_add(i as u64),
                ..opts.ransac
            };
            let res = ransac_estimate(&points, &cfg)?;
            let mut pose = res.pose;
            if opts.continuous_path {
                pose = PlanarPose::new(
                    fold_continuous_deg(pose.alpha_deg()).to_radians(),
                    pose.beta,
                );
            }
            Ok((pose, res.inlier_count()))
        })
        .collect();

    let steps: Vec<Option<PlanarPose>> = estimates
        .iter()
        .map(|e| e.as_ref().ok().map(|(p, _)| *p))
        .collect();
    let path = concatenate(&steps);

    input
        .pairs
        .iter()
        .zip(estimates)
        .zip(path)
        .map(|((pair, est), (heading, pos))| {
            let mut row = TrajectoryRow {
                pair_id: pair.id.clone(),
                status: "ok".into(),
                alpha_deg: None,
                beta_deg: None,
                inliers: None,
                heading_deg: heading,
                x: pos.x,
                z: pos.z,
                rot_err_deg: None,
                trans_err_deg: None,
            };
            match est {
                Ok((pose, inliers)) => {
                    row.alpha_deg = Some(pose.alpha_deg());
                    row.beta_deg = Some(pose.beta_deg());
                    row.inliers = Some(inliers);
                    if let Some(gt) = pair.gt {
                        // folding was already applied to the estimate
                        row.rot_err_deg = Some(rotation_angular_error_mode(
                            pose.alpha,
                            gt.alpha_deg.to_radians(),
                            false,
                        ));
                        let e = translation_angular_error(pose.beta, gt.beta_deg.to_radians());
                        row.trans_err_deg = Some(if opts.sign_agnostic {
                            e.min(180.0 - e)
                        } else {
                            e
                        });
                    }
                }
                Err(e) => row.status = super::error_code(&e).to_string(),
            }
            row
        })
        .collect()
}

/// Empirical CDF points `(error, fraction ≤ error)` of the finite errors.
pub fn empirical_cdf(errors: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = errors.iter().copied().filter(|e| e.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, e)| (e, (i + 1) as f64 / n))
        .collect()
}
