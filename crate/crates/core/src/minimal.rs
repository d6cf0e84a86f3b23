//! Two-point minimal solver.
//!
//! Two correspondences give two linear equations in the parameter vector
//! `x = [cos β, sin β, sin(α+β), cos(α+β)]`. Its null space is spanned by
//! `n₁, n₂`; writing `x = u n₁ + v n₂` and requiring both halves of `x` to have
//! equal length gives a homogeneous quadratic in `(u, v)` with at most two
//! real solutions.

use nalgebra::{Matrix4, Vector4};

use crate::error::{PoseError, Result};
use crate::geom::{Correspondence, PlanarPose};

/// Ratio of singular values below which the two rows count as dependent.
const RANK_TOL: f64 = 1e-10;

/// All poses consistent with two correspondences, both translation signs
/// included (at most four).
pub fn solve_two_point(c1: &Correspondence, c2: &Correspondence) -> Result<Vec<PlanarPose>> {
    if !c1.is_finite() || !c2.is_finite() {
        return Err(PoseError::InvalidInput(
            "correspondence has non-finite coordinates".into(),
        ));
    }
    let (n1, n2) = null_space(c1, c2)?;

    // xᵀ D x with D = diag(1, 1, -1, -1)
    let dmul =
        |a: &Vector4<f64>, b: &Vector4<f64>| a[0] * b[0] + a[1] * b[1] - a[2] * b[2] - a[3] * b[3];
    let a = dmul(&n1, &n1);
    let b = dmul(&n1, &n2);
    let c = dmul(&n2, &n2);

    let mut combos: Vec<(f64, f64)> = Vec::with_capacity(2);
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Err(PoseError::DegenerateSample);
    }
    // a u² + 2 b u v + c v² = 0
    if a.abs() <= 1e-14 * scale {
        // v = 0 is one solution; the other has u = -c v / (2 b)
        combos.push((1.0, 0.0));
        if b.abs() > 1e-14 * scale {
            combos.push((-c / (2.0 * b), 1.0));
        }
    } else {
        let mut disc = b * b - a * c;
        // a double root can round to a slightly negative discriminant
        if disc < 0.0 && disc >= -1e-12 * (b * b).max((a * c).abs()) {
            disc = 0.0;
        }
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -(b + b.signum() * sq);
            if q != 0.0 {
                combos.push((q / a, 1.0));
                combos.push((c / q, 1.0));
            } else {
                combos.push((-b / a, 1.0));
            }
        }
    }

    let mut poses: Vec<PlanarPose> = Vec::with_capacity(4);
    for (u, v) in combos {
        let x = n1 * u + n2 * v;
        let h1 = x[0].hypot(x[1]);
        let h2 = x[2].hypot(x[3]);
        if h1 == 0.0 || h2 == 0.0 {
            continue;
        }
        let pose = PlanarPose::from_parameter_vector(&[x[0] / h1, x[1] / h1, x[2] / h2, x[3] / h2]);
        if poses.iter().any(|p| same_pose(p, &pose)) {
            continue;
        }
        poses.push(pose);
        poses.push(pose.flipped());
    }
    Ok(poses)
}

fn same_pose(a: &PlanarPose, b: &PlanarPose) -> bool {
    crate::geom::angular_difference_deg(a.alpha, b.alpha) < 1e-12
        && crate::geom::angular_difference_deg(a.beta, b.beta) < 1e-12
}

/// Orthonormal basis of the null space of the two design rows.
fn null_space(c1: &Correspondence, c2: &Correspondence) -> Result<(Vector4<f64>, Vector4<f64>)> {
    let r1 = c1.design_row();
    let r2 = c2.design_row();
    let mut m = Matrix4::zeros();
    for j in 0..4 {
        m[(0, j)] = r1[j];
        m[(1, j)] = r2[j];
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or(PoseError::DegenerateSample)?;
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s_max = svd.singular_values[order[0]];
    let s_second = svd.singular_values[order[1]];
    if s_max == 0.0 || s_second <= RANK_TOL * s_max {
        return Err(PoseError::DegenerateSample);
    }
    let row = |k: usize| Vector4::new(v_t[(k, 0)], v_t[(k, 1)], v_t[(k, 2)], v_t[(k, 3)]);
    Ok((row(order[2]), row(order[3])))
}
