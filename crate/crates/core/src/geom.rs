//! Normalized correspondences, planar poses and the planar essential matrix.
//!
//! Convention: a point `X1` in the first camera frame maps to `X2 = R X1 + t`
//! in the second, with `R` the rotation by `alpha` about Y and
//! `t = [cos β, 0, sin β]`. The essential matrix is `E = [t]ₓ R` and
//! corresponding normalized points satisfy `q2ᵀ E q1 = 0`.

use std::f64::consts::PI;
use std::ops::Neg;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};

/// Wraps an angle in radians to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Wraps an angle in degrees to `(-180, 180]`.
pub fn wrap_degrees(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// One pair of normalized image points (`q = C⁻¹ p`), homogeneous coordinate 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub q1x: f64,
    pub q1y: f64,
    pub q2x: f64,
    pub q2y: f64,
}

impl Correspondence {
    pub fn new(q1x: f64, q1y: f64, q2x: f64, q2y: f64) -> Self {
        Self { q1x, q1y, q2x, q2y }
    }

    pub fn is_finite(&self) -> bool {
        self.q1x.is_finite() && self.q1y.is_finite() && self.q2x.is_finite() && self.q2y.is_finite()
    }

    pub fn q1(&self) -> Vector3<f64> {
        Vector3::new(self.q1x, self.q1y, 1.0)
    }

    pub fn q2(&self) -> Vector3<f64> {
        Vector3::new(self.q2x, self.q2y, 1.0)
    }

    /// Coefficients of the epipolar residual as a linear form in
    /// [`PlanarPose::parameter_vector`]: `[q1y, -q2x·q1y, q2y·q1x, -q2y]`.
    pub fn design_row(&self) -> [f64; 4] {
        [
            self.q1y,
            -self.q2x * self.q1y,
            self.q2y * self.q1x,
            -self.q2y,
        ]
    }
}

/// Rejects empty or non-finite input.
pub(crate) fn validate_points(points: &[Correspondence], required: usize) -> Result<()> {
    if points.len() < required {
        return Err(PoseError::NotEnoughPoints {
            required,
            got: points.len(),
        });
    }
    if let Some(i) = points.iter().position(|c| !c.is_finite()) {
        return Err(PoseError::InvalidInput(format!(
            "correspondence {i} has non-finite coordinates"
        )));
    }
    Ok(())
}

/// Rotation angle about Y and translation direction angle in the XZ plane, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPose {
    pub alpha: f64,
    pub beta: f64,
}

impl PlanarPose {
    /// Both angles are wrapped to `(-π, π]`.
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha: wrap_angle(alpha),
            beta: wrap_angle(beta),
        }
    }

    pub fn from_degrees(alpha_deg: f64, beta_deg: f64) -> Self {
        Self::new(alpha_deg.to_radians(), beta_deg.to_radians())
    }

    pub fn alpha_deg(&self) -> f64 {
        self.alpha.to_degrees()
    }

    pub fn beta_deg(&self) -> f64 {
        self.beta.to_degrees()
    }

    /// `[cos β, sin β, sin(α+β), cos(α+β)]`, the unknown vector paired with
    /// [`Correspondence::design_row`].
    pub fn parameter_vector(&self) -> [f64; 4] {
        let theta = self.alpha + self.beta;
        [self.beta.cos(), self.beta.sin(), theta.sin(), theta.cos()]
    }

    /// Inverse of [`parameter_vector`](Self::parameter_vector). The two
    /// halves need not be normalized but must share a common positive scale.
    pub fn from_parameter_vector(x: &[f64; 4]) -> Self {
        let beta = x[1].atan2(x[0]);
        let theta = x[2].atan2(x[3]);
        Self::new(theta - beta, beta)
    }

    /// The same essential matrix up to sign: `t → -t`.
    pub fn flipped(&self) -> Self {
        Self::new(self.alpha, self.beta + PI)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_y(self.alpha)
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.beta.cos(), 0.0, self.beta.sin())
    }

    pub fn essential(&self) -> EssentialMatrix {
        essential_from_pose(self)
    }
}

/// Rotation about the Y axis, matching the planar motion model.
pub fn rotation_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rotation_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Essential matrix stored as `e1..e9` in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssentialMatrix {
    pub e: [f64; 9],
}

impl EssentialMatrix {
    pub fn from_row_major(e: [f64; 9]) -> Self {
        Self { e }
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let mut e = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                e[3 * r + c] = m[(r, c)];
            }
        }
        Self { e }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.e)
    }

    /// `e1 = e3 = e5 = e7 = e9 = 0` within `tol` relative to the largest entry.
    pub fn has_planar_pattern(&self, tol: f64) -> bool {
        let scale = self.e.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        [0, 2, 4, 6, 8]
            .iter()
            .all(|&i| self.e[i].abs() <= tol * scale)
    }

    /// Both pose candidates; the second is the first with `t → -t`.
    pub fn decompose(&self) -> Result<(PlanarPose, PlanarPose)> {
        pose_from_essential(self)
    }
}

impl Neg for EssentialMatrix {
    type Output = EssentialMatrix;
    fn neg(self) -> EssentialMatrix {
        EssentialMatrix {
            e: self.e.map(|v| -v),
        }
    }
}

/// Planar essential matrix: `e2 = -sin β`, `e4 = sin(α+β)`, `e6 = -cos(α+β)`,
/// `e8 = cos β`, all other entries exactly zero.
pub fn essential_from_pose(pose: &PlanarPose) -> EssentialMatrix {
    let theta = pose.alpha + pose.beta;
    let mut e = [0.0; 9];
    e[1] = -pose.beta.sin();
    e[3] = theta.sin();
    e[5] = -theta.cos();
    e[7] = pose.beta.cos();
    EssentialMatrix { e }
}

/// Inverts [`essential_from_pose`] up to the sign of `E`.
pub fn pose_from_essential(em: &EssentialMatrix) -> Result<(PlanarPose, PlanarPose)> {
    let e = &em.e;
    if e.iter().any(|v| !v.is_finite()) {
        return Err(PoseError::InvalidInput(
            "essential matrix has non-finite entries".into(),
        ));
    }
    if e[1] == 0.0 && e[7] == 0.0 || e[3] == 0.0 && e[5] == 0.0 {
        return Err(PoseError::InvalidInput(
            "essential matrix has a vanishing translation or rotation block".into(),
        ));
    }
    if !em.has_planar_pattern(1e-9) {
        return Err(PoseError::InvalidInput(
            "essential matrix does not have the planar zero pattern".into(),
        ));
    }
    let beta = (-e[1]).atan2(e[7]);
    let theta = e[3].atan2(-e[5]);
    let first = PlanarPose::new(theta - beta, beta);
    Ok((first, first.flipped()))
}

/// Signed algebraic residual `q2ᵀ E q1`.
pub fn epipolar_residual(em: &EssentialMatrix, c: &Correspondence) -> f64 {
    let e = &em.e;
    let l0 = e[0] * c.q1x + e[1] * c.q1y + e[2];
    let l1 = e[3] * c.q1x + e[4] * c.q1y + e[5];
    let l2 = e[6] * c.q1x + e[7] * c.q1y + e[8];
    c.q2x * l0 + c.q2y * l1 + l2
}

/// First-order geometric error `r² / (|(E q1)₁,₂|² + |(Eᵀ q2)₁,₂|²)`.
///
/// Returns `+∞` when the gradient vanishes but the residual does not, and 0
/// when both vanish.
pub fn sampson_distance(em: &EssentialMatrix, c: &Correspondence) -> f64 {
    let e = &em.e;
    let l0 = e[0] * c.q1x + e[1] * c.q1y + e[2];
    let l1 = e[3] * c.q1x + e[4] * c.q1y + e[5];
    let l2 = e[6] * c.q1x + e[7] * c.q1y + e[8];
    let m0 = e[0] * c.q2x + e[3] * c.q2y + e[6];
    let m1 = e[1] * c.q2x + e[4] * c.q2y + e[7];
    let r = c.q2x * l0 + c.q2y * l1 + l2;
    let denom = l0 * l0 + l1 * l1 + m0 * m0 + m1 * m1;
    let num = r * r;
    if denom > 0.0 {
        num / denom
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Midpoint triangulation. Returns the depths of the point in both cameras, or
/// `None` when the rays are (numerically) parallel.
pub fn triangulate_depths(pose: &PlanarPose, c: &Correspondence) -> Option<(f64, f64)> {
    let r = pose.rotation();
    let t = pose.translation();
    let d1 = c.q1();
    // second camera centre and ray, expressed in the first camera frame
    let c2 = -(r.transpose() * t);
    let d2 = r.transpose() * c.q2();

    // minimize |s1 d1 - (c2 + s2 d2)|
    let a = d1.dot(&d1);
    let b = d1.dot(&d2);
    let cc = d2.dot(&d2);
    let d = d1.dot(&c2);
    let e = d2.dot(&c2);
    let den = a * cc - b * b;
    if den <= 1e-14 * a * cc {
        return None;
    }
    let s1 = (d * cc - b * e) / den;
    let s2 = (b * d - a * e) / den;
    let mid = 0.5 * (d1 * s1 + c2 + d2 * s2);
    let z1 = mid.z;
    let z2 = (r * mid + t).z;
    Some((z1, z2))
}

/// Number of correspondences that triangulate in front of both cameras.
pub fn cheirality_count(pose: &PlanarPose, points: &[Correspondence]) -> usize {
    points
        .iter()
        .filter(|c| matches!(triangulate_depths(pose, c), Some((z1, z2)) if z1 > 0.0 && z2 > 0.0))
        .count()
}

fn mean_sampson(pose: &PlanarPose, points: &[Correspondence]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let e = pose.essential();
    points.iter().map(|c| sampson_distance(&e, c)).sum::<f64>() / points.len() as f64
}

/// Picks the candidate with the most points in front of both cameras; ties go
/// to the lower mean Sampson distance, then to the earlier candidate.
pub fn cheirality_select(
    candidates: &[PlanarPose],
    points: &[Correspondence],
) -> Option<PlanarPose> {
    let mut best: Option<(PlanarPose, usize, f64)> = None;
    for cand in candidates {
        let count = cheirality_count(cand, points);
        let better = match &best {
            None => true,
            Some((_, bc, bs)) => count > *bc || (count == *bc && mean_sampson(cand, points) < *bs),
        };
        if better {
            best = Some((*cand, count, mean_sampson(cand, points)));
        }
    }
    best.map(|(p, _, _)| p)
}

/// Absolute wrapped angular difference in degrees, in `[0, 180]`.
pub fn angular_difference_deg(est: f64, gt: f64) -> f64 {
    wrap_angle(est - gt).abs().to_degrees()
}

/// Rotation angular error in degrees.
pub fn rotation_angular_error(alpha_est: f64, alpha_gt: f64) -> f64 {
    angular_difference_deg(alpha_est, alpha_gt)
}

/// Translation direction error in degrees.
pub fn translation_angular_error(beta_est: f64, beta_gt: f64) -> f64 {
    angular_difference_deg(beta_est, beta_gt)
}

/// Translation error ignoring the sign of `t`, in `[0, 90]`.
pub fn translation_angular_error_unsigned(beta_est: f64, beta_gt: f64) -> f64 {
    let e = translation_angular_error(beta_est, beta_gt);
    e.min(180.0 - e)
}

/// Folds an angle in degrees assuming a continuous path: angles beyond ±90°
/// lose 90° of magnitude, so 110° becomes 20° and -110° becomes -20°.
pub fn fold_continuous_deg(angle_deg: f64) -> f64 {
    let a = wrap_degrees(angle_deg);
    if a > 90.0 {
        a - 90.0
    } else if a < -90.0 {
        a + 90.0
    } else {
        a
    }
}

/// Rotation error with optional continuous-path folding of the estimate.
pub fn rotation_angular_error_mode(alpha_est: f64, alpha_gt: f64, continuous_path: bool) -> f64 {
    if continuous_path {
        let folded = fold_continuous_deg(alpha_est.to_degrees()).to_radians();
        rotation_angular_error(folded, alpha_gt)
    } else {
        rotation_angular_error(alpha_est, alpha_gt)
    }
}

/// Angle of the relative rotation `aᵀ b`, degrees.
pub fn rotation_difference_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    let cos = (rel.trace() - 1.0) / 2.0;
    let sin = 0.5
        * Vector3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        )
        .norm();
    sin.atan2(cos).to_degrees()
}

/// Angle between two direction vectors, degrees.
pub fn direction_difference_deg(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    u.cross(v).norm().atan2(u.dot(v)).to_degrees()
}
