//! Relative pose estimation for two calibrated cameras under planar motion.
//!
//! The motion is described by two angles: `alpha`, the rotation about the
//! vertical (Y) axis, and `beta`, the direction of the translation
//! `t = [cos β, 0, sin β]` in the XZ plane. The crate provides
//!
//! * [`optimal`]: the least-squares optimal N-point solver (N ≥ 3), whose
//!   candidates are the real roots of a degree-6 polynomial in a Lagrange
//!   multiplier, plus a linear baseline,
//! * [`minimal`]: a two-point minimal solver for hypothesis generation,
//! * [`robust`]: LO-RANSAC built on the two solvers,
//! * [`synth`]: a synthetic scene generator and benchmark harness,
//! * [`cli`]: file formats, calibration, trajectory concatenation and the
//!   `planar-pose` command implementations.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod geom;
pub mod minimal;
pub mod optimal;
pub mod poly;
pub mod robust;
pub mod synth;

pub use error::{PoseError, Result};
pub use geom::{Correspondence, EssentialMatrix, PlanarPose};
pub use minimal::solve_two_point;
pub use optimal::{
    solve_linear_planar, solve_optimal, Branch, DesignColumns, Diagnostics, OptimalOptions,
    SolverCandidate,
};
pub use robust::{ransac_estimate, RansacConfig, RansacResult};
