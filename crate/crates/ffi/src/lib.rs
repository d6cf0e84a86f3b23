//! C ABI for the planar-pose estimator.
//!
//! Every function returns a [`PpStatus`]; on failure a human-readable message
//! is kept per thread and can be read with [`pp_last_error_message`]. Angles
//! cross the boundary in radians. Robust estimation settings live in an
//! opaque [`PpEstimator`] created with [`pp_estimator_new`] and released with
//! [`pp_estimator_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use planar_pose::geom::{essential_from_pose, Correspondence, PlanarPose};
use planar_pose::optimal::{solve_linear_planar, solve_optimal, OptimalOptions};
use planar_pose::robust::{ransac_estimate, RansacConfig};
use planar_pose::{solve_two_point, PoseError};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Degenerate = 3,
    RobustFailure = 4,
    NoSolution = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A correspondence in normalized image coordinates.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpCorrespondence {
    pub q1x: f64,
    pub q1y: f64,
    pub q2x: f64,
    pub q2y: f64,
}

/// Planar pose: yaw `alpha` and translation direction `beta`, radians.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpPose {
    pub alpha: f64,
    pub beta: f64,
}

/// Opaque estimator settings.
pub struct PpEstimator {
    ransac: RansacConfig,
    optimal: OptimalOptions,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &PoseError) -> PpStatus {
    match e {
        PoseError::InvalidInput(_)
        | PoseError::NotEnoughPoints { .. }
        | PoseError::Generation(_) => PpStatus::InvalidInput,
        PoseError::Degenerate(_) | PoseError::DegenerateSample => PpStatus::Degenerate,
        PoseError::RobustFailure { .. } => PpStatus::RobustFailure,
        PoseError::NoSolution => PpStatus::NoSolution,
    }
}

fn fail(status: PpStatus, msg: &str) -> PpStatus {
    set_last_error(msg);
    status
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), PpStatus>) -> PpStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PpStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(PpStatus::Panic, "internal panic"),
    }
}

fn pose_error(e: PoseError) -> PpStatus {
    fail(status_of(&e), &e.to_string())
}

unsafe fn points(
    ptr: *const PpCorrespondence,
    len: usize,
) -> Result<Vec<Correspondence>, PpStatus> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if ptr.is_null() {
        return Err(fail(PpStatus::NullPointer, "points pointer is null"));
    }
    let s = slice::from_raw_parts(ptr, len);
    Ok(s.iter()
        .map(|c| Correspondence::new(c.q1x, c.q1y, c.q2x, c.q2y))
        .collect())
}

fn to_ffi(p: &PlanarPose) -> PpPose {
    PpPose {
        alpha: p.alpha,
        beta: p.beta,
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), PpStatus> {
    if p.is_null() {
        Err(fail(PpStatus::NullPointer, &format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn pp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn pp_status_string(status: PpStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        PpStatus::Ok => b"ok\0",
        PpStatus::NullPointer => b"null pointer\0",
        PpStatus::InvalidInput => b"invalid input\0",
        PpStatus::Degenerate => b"degenerate configuration\0",
        PpStatus::RobustFailure => b"robust estimation failed\0",
        PpStatus::NoSolution => b"no solution\0",
        PpStatus::BufferTooSmall => b"buffer too small\0",
        PpStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

/// New estimator with default settings. Release with [`pp_estimator_free`].
#[no_mangle]
pub extern "C" fn pp_estimator_new() -> *mut PpEstimator {
    Box::into_raw(Box::new(PpEstimator {
        ransac: RansacConfig::default(),
        optimal: OptimalOptions::default(),
    }))
}

/// Frees an estimator; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pp_estimator_free(est: *mut PpEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

unsafe fn with_estimator(
    est: *mut PpEstimator,
    f: impl FnOnce(&mut PpEstimator) -> Result<(), PpStatus>,
) -> PpStatus {
    guard(|| {
        non_null(est, "estimator")?;
        f(&mut *est)
    })
}

/// Sampson-distance inlier threshold, squared normalized units.
#[no_mangle]
pub unsafe extern "C" fn pp_estimator_set_threshold(
    est: *mut PpEstimator,
    threshold: f64,
) -> PpStatus {
    with_estimator(est, |e| {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(fail(PpStatus::InvalidInput, "threshold must be positive"));
        }
        e.ransac.threshold = threshold;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pp_estimator_set_max_iterations(
    est: *mut PpEstimator,
    iterations: usize,
) -> PpStatus {
    with_estimator(est, |e| {
        if iterations == 0 {
            return Err(fail(
                PpStatus::InvalidInput,
                "max iterations must be positive",
            ));
        }
        e.ransac.max_iterations = iterations;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pp_estimator_set_confidence(
    est: *mut PpEstimator,
    confidence: f64,
) -> PpStatus {
    with_estimator(est, |e| {
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(fail(
                PpStatus::InvalidInput,
                "confidence must lie in (0, 1)",
            ));
        }
        e.ransac.confidence = confidence;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pp_estimator_set_seed(est: *mut PpEstimator, seed: u64) -> PpStatus {
    with_estimator(est, |e| {
        e.ransac.seed = seed;
        Ok(())
    })
}

/// Fraction of points held out for candidate selection, in `[0, 0.5]`. Applies
/// to both the optimal solver and the robust refits.
#[no_mangle]
pub unsafe extern "C" fn pp_estimator_set_holdout_fraction(
    est: *mut PpEstimator,
    fraction: f64,
) -> PpStatus {
    with_estimator(est, |e| {
        if !(0.0..=0.5).contains(&fraction) {
            return Err(fail(
                PpStatus::InvalidInput,
                "holdout fraction must lie in [0, 0.5]",
            ));
        }
        e.ransac.holdout_fraction = fraction;
        e.optimal.holdout_fraction = fraction;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pp_estimator_set_local_optimization(
    est: *mut PpEstimator,
    enabled: bool,
) -> PpStatus {
    with_estimator(est, |e| {
        e.ransac.lo_enabled = enabled;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pp_estimator_set_min_inliers(
    est: *mut PpEstimator,
    min_inliers: usize,
) -> PpStatus {
    with_estimator(est, |e| {
        e.ransac.min_inliers = min_inliers;
        Ok(())
    })
}

/// Least-squares optimal pose from at least three points. `out_cost` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn pp_estimator_solve_optimal(
    est: *mut PpEstimator,
    pts: *const PpCorrespondence,
    len: usize,
    out_pose: *mut PpPose,
    out_cost: *mut f64,
) -> PpStatus {
    with_estimator(est, |e| {
        non_null(out_pose, "output pose")?;
        let p = points(pts, len)?;
        let (pose, diag) = solve_optimal(&p, &e.optimal).map_err(pose_error)?;
        *out_pose = to_ffi(&pose);
        if !out_cost.is_null() {
            *out_cost = diag.cost;
        }
        Ok(())
    })
}

/// Robust pose. `inlier_mask` may be null; otherwise it must hold `len`
/// bytes and receives 1 for inliers and 0 for outliers. `out_inliers` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn pp_estimator_ransac(
    est: *mut PpEstimator,
    pts: *const PpCorrespondence,
    len: usize,
    out_pose: *mut PpPose,
    inlier_mask: *mut u8,
    out_inliers: *mut usize,
) -> PpStatus {
    with_estimator(est, |e| {
        non_null(out_pose, "output pose")?;
        let p = points(pts, len)?;
        let res = ransac_estimate(&p, &e.ransac).map_err(pose_error)?;
        *out_pose = to_ffi(&res.pose);
        if !inlier_mask.is_null() {
            let mask = slice::from_raw_parts_mut(inlier_mask, len);
            for (m, b) in mask.iter_mut().zip(&res.inlier_mask) {
                *m = u8::from(*b);
            }
        }
        if !out_inliers.is_null() {
            *out_inliers = res.inlier_count();
        }
        Ok(())
    })
}

/// Linear baseline solver.
#[no_mangle]
pub unsafe extern "C" fn pp_solve_linear(
    pts: *const PpCorrespondence,
    len: usize,
    out_pose: *mut PpPose,
) -> PpStatus {
    guard(|| {
        non_null(out_pose, "output pose")?;
        let p = points(pts, len)?;
        *out_pose = to_ffi(&solve_linear_planar(&p).map_err(pose_error)?);
        Ok(())
    })
}

/// Minimal solver. Writes up to `capacity` poses (at most four exist) and
/// their number to `out_count`. If `capacity` is too small, `out_count`
/// still receives the number needed and `BufferTooSmall` is returned.
#[no_mangle]
pub unsafe extern "C" fn pp_solve_two_point(
    c1: *const PpCorrespondence,
    c2: *const PpCorrespondence,
    out_poses: *mut PpPose,
    capacity: usize,
    out_count: *mut usize,
) -> PpStatus {
    guard(|| {
        non_null(c1, "first correspondence")?;
        non_null(c2, "second correspondence")?;
        non_null(out_count, "output count")?;
        let (a, b) = (&*c1, &*c2);
        let poses = solve_two_point(
            &Correspondence::new(a.q1x, a.q1y, a.q2x, a.q2y),
            &Correspondence::new(b.q1x, b.q1y, b.q2x, b.q2y),
        )
        .map_err(pose_error)?;
        *out_count = poses.len();
        if poses.len() > capacity {
            return Err(fail(PpStatus::BufferTooSmall, "pose buffer too small"));
        }
        if !poses.is_empty() {
            non_null(out_poses, "output poses")?;
            let out = slice::from_raw_parts_mut(out_poses, poses.len());
            for (o, p) in out.iter_mut().zip(&poses) {
                *o = to_ffi(p);
            }
        }
        Ok(())
    })
}

/// Planar essential matrix of `pose`, row-major into `out[9]`.
#[no_mangle]
pub unsafe extern "C" fn pp_essential_from_pose(pose: *const PpPose, out: *mut f64) -> PpStatus {
    guard(|| {
        non_null(pose, "pose")?;
        non_null(out, "output matrix")?;
        let p = &*pose;
        let e = essential_from_pose(&PlanarPose::new(p.alpha, p.beta));
        slice::from_raw_parts_mut(out, 9).copy_from_slice(&e.e);
        Ok(())
    })
}
