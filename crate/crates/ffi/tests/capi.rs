use std::ffi::CStr;
use std::ptr;

use planar_pose_ffi::*;

fn project(alpha_deg: f64, beta_deg: f64, pts: &[[f64; 3]]) -> Vec<PpCorrespondence> {
    let (a, b) = (alpha_deg.to_radians(), beta_deg.to_radians());
    pts.iter()
        .map(|p| {
            // X2 = Ry(a) X1 + [cos b, 0, sin b]
            let x = a.cos() * p[0] + a.sin() * p[2] + b.cos();
            let y = p[1];
            let z = -a.sin() * p[0] + a.cos() * p[2] + b.sin();
            PpCorrespondence {
                q1x: p[0] / p[2],
                q1y: p[1] / p[2],
                q2x: x / z,
                q2y: y / z,
            }
        })
        .collect()
}

fn scene(alpha_deg: f64, beta_deg: f64) -> Vec<PpCorrespondence> {
    let pts: Vec<[f64; 3]> = (0..40)
        .map(|i| {
            let t = i as f64;
            [
                (t * 0.37).sin() * 2.0,
                (t * 0.91).cos() * 1.5,
                5.0 + (t * 0.53).sin() * 2.0,
            ]
        })
        .collect();
    project(alpha_deg, beta_deg, &pts)
}

fn last_error() -> Option<String> {
    let p = pp_last_error_message();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn angle_close(a: f64, b_deg: f64, tol_deg: f64) -> bool {
    let d = (a.to_degrees() - b_deg).rem_euclid(360.0);
    d.min(360.0 - d) < tol_deg
}

#[test]
fn optimal_recovers_exact_pose() {
    let pts = scene(12.0, 70.0);
    unsafe {
        let est = pp_estimator_new();
        let mut pose = PpPose {
            alpha: 0.0,
            beta: 0.0,
        };
        let mut cost = -1.0;
        let s = pp_estimator_solve_optimal(est, pts.as_ptr(), pts.len(), &mut pose, &mut cost);
        assert_eq!(s, PpStatus::Ok);
        assert!(angle_close(pose.alpha, 12.0, 1e-7), "{pose:?}");
        assert!(angle_close(pose.beta, 70.0, 1e-7), "{pose:?}");
        assert!((0.0..1e-20).contains(&cost), "{cost}");
        pp_estimator_free(est);
    }
}

#[test]
fn linear_recovers_exact_pose() {
    let pts = scene(-5.0, 100.0);
    let mut pose = PpPose {
        alpha: 0.0,
        beta: 0.0,
    };
    let s = unsafe { pp_solve_linear(pts.as_ptr(), pts.len(), &mut pose) };
    assert_eq!(s, PpStatus::Ok);
    assert!(angle_close(pose.alpha, -5.0, 1e-7), "{pose:?}");
    assert!(angle_close(pose.beta, 100.0, 1e-7), "{pose:?}");
}

#[test]
fn two_point_contains_truth() {
    let pts = scene(20.0, 45.0);
    let mut out = [PpPose {
        alpha: 0.0,
        beta: 0.0,
    }; 4];
    let mut count = 0usize;
    let s =
        unsafe { pp_solve_two_point(&pts[0], &pts[1], out.as_mut_ptr(), out.len(), &mut count) };
    assert_eq!(s, PpStatus::Ok);
    assert!((1..=4).contains(&count));
    assert!(out[..count]
        .iter()
        .any(|p| angle_close(p.alpha, 20.0, 1e-7) && angle_close(p.beta, 45.0, 1e-7)));
}

#[test]
fn two_point_reports_needed_capacity() {
    let pts = scene(20.0, 45.0);
    let mut count = 0usize;
    let s = unsafe { pp_solve_two_point(&pts[0], &pts[1], ptr::null_mut(), 0, &mut count) };
    assert_eq!(s, PpStatus::BufferTooSmall);
    assert!(count > 0);
    assert!(last_error().is_some());
}

#[test]
fn ransac_flags_outliers() {
    let mut pts = scene(8.0, 80.0);
    for (i, p) in pts.iter_mut().enumerate().take(8) {
        p.q2x += 0.3 + 0.05 * i as f64;
        p.q2y -= 0.2;
    }
    let mut mask = vec![7u8; pts.len()];
    let mut inliers = 0usize;
    let mut pose = PpPose {
        alpha: 0.0,
        beta: 0.0,
    };
    unsafe {
        let est = pp_estimator_new();
        assert_eq!(pp_estimator_set_threshold(est, 1e-8), PpStatus::Ok);
        assert_eq!(pp_estimator_set_seed(est, 3), PpStatus::Ok);
        let s = pp_estimator_ransac(
            est,
            pts.as_ptr(),
            pts.len(),
            &mut pose,
            mask.as_mut_ptr(),
            &mut inliers,
        );
        pp_estimator_free(est);
        assert_eq!(s, PpStatus::Ok, "{:?}", last_error());
    }
    assert_eq!(inliers, 32);
    assert!(mask[..8].iter().all(|&m| m == 0));
    assert!(mask[8..].iter().all(|&m| m == 1));
    assert!(angle_close(pose.alpha, 8.0, 1e-6), "{pose:?}");
    assert!(angle_close(pose.beta, 80.0, 1e-6), "{pose:?}");
}

#[test]
fn essential_matches_pose() {
    let pose = PpPose {
        alpha: 0.3,
        beta: 1.1,
    };
    let mut e = [f64::NAN; 9];
    assert_eq!(
        unsafe { pp_essential_from_pose(&pose, e.as_mut_ptr()) },
        PpStatus::Ok
    );
    let th = pose.alpha + pose.beta;
    let expected = [
        0.0,
        -pose.beta.sin(),
        0.0,
        th.sin(),
        0.0,
        -th.cos(),
        0.0,
        pose.beta.cos(),
        0.0,
    ];
    for (a, b) in e.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15, "{e:?}");
    }
}

#[test]
fn errors_are_reported() {
    let pts = scene(0.0, 90.0);
    let mut pose = PpPose {
        alpha: 0.0,
        beta: 0.0,
    };
    unsafe {
        let est = pp_estimator_new();
        assert_eq!(
            pp_estimator_solve_optimal(est, pts.as_ptr(), 2, &mut pose, ptr::null_mut()),
            PpStatus::InvalidInput
        );
        assert!(last_error().unwrap().len() > 3);
        assert_eq!(
            pp_estimator_solve_optimal(est, ptr::null(), 5, &mut pose, ptr::null_mut()),
            PpStatus::NullPointer
        );
        assert_eq!(
            pp_estimator_set_confidence(est, 1.5),
            PpStatus::InvalidInput
        );
        assert_eq!(
            pp_estimator_set_threshold(est, -1.0),
            PpStatus::InvalidInput
        );
        assert_eq!(
            pp_estimator_set_holdout_fraction(est, 1.0),
            PpStatus::InvalidInput
        );
        assert_eq!(
            pp_estimator_set_max_iterations(est, 0),
            PpStatus::InvalidInput
        );
        assert_eq!(pp_estimator_set_holdout_fraction(est, 0.2), PpStatus::Ok);
        assert!(last_error().is_none());
        pp_estimator_free(est);
        assert_eq!(
            pp_estimator_set_seed(ptr::null_mut(), 1),
            PpStatus::NullPointer
        );
        pp_estimator_free(ptr::null_mut());
    }
}

#[test]
fn degenerate_input_is_rejected() {
    let pts = vec![
        PpCorrespondence {
            q1x: 0.1,
            q1y: 0.0,
            q2x: 0.1,
            q2y: 0.0,
        };
        10
    ];
    let mut pose = PpPose {
        alpha: 0.0,
        beta: 0.0,
    };
    let s = unsafe { pp_solve_linear(pts.as_ptr(), pts.len(), &mut pose) };
    assert_ne!(s, PpStatus::Ok);
    assert!(last_error().is_some());
}

#[test]
fn status_strings_are_static() {
    for s in [PpStatus::Ok, PpStatus::Degenerate, PpStatus::Panic] {
        let text = unsafe { CStr::from_ptr(pp_status_string(s)) };
        assert!(!text.to_bytes().is_empty());
    }
}
