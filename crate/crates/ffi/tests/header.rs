use std::path::PathBuf;
use std::process::Command;

fn header_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/planar_pose.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header_path()).unwrap();
    for sym in [
        "typedef struct PpEstimator PpEstimator",
        "PP_STATUS_OK = 0",
        "PP_STATUS_PANIC",
        "pp_last_error_message",
        "pp_status_string",
        "pp_estimator_new",
        "pp_estimator_free",
        "pp_estimator_set_threshold",
        "pp_estimator_set_max_iterations",
        "pp_estimator_set_confidence",
        "pp_estimator_set_seed",
        "pp_estimator_set_holdout_fraction",
        "pp_estimator_set_local_optimization",
        "pp_estimator_set_min_inliers",
        "pp_estimator_solve_optimal",
        "pp_estimator_ransac",
        "pp_solve_linear",
        "pp_solve_two_point",
        "pp_essential_from_pose",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
}

fn compiles_with(compiler: &str, lang: &str) -> Option<bool> {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"planar_pose.h\"\n\
         int main(void) {\n\
           PpEstimator *e = pp_estimator_new();\n\
           PpPose p; double c;\n\
           PpStatus s = pp_estimator_solve_optimal(e, NULL, 0, &p, &c);\n\
           pp_estimator_free(e);\n\
           return s == PP_STATUS_OK;\n\
         }\n",
    )
    .unwrap();
    let include = header_path().parent().unwrap().to_path_buf();
    let out = Command::new(compiler)
        .args(["-x", lang, "-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .ok()?;
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    Some(out.status.success())
}

#[test]
fn header_compiles_as_c_and_cpp() {
    match compiles_with("cc", "c") {
        Some(ok) => assert!(ok, "header rejected by C compiler"),
        None => eprintln!("no C compiler found, skipping"),
    }
    if let Some(ok) = compiles_with("c++", "c++") {
        assert!(ok, "header rejected by C++ compiler");
    }
}
