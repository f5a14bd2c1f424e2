use std::process::{Command, Output};

fn mfb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfb"))
        .args(args)
        .output()
        .expect("spawn mfb")
}

#[test]
fn verify_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = mfb(&[
        "verify",
        "minkowski5",
        "--suite",
        "curvature",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS curvature.riemann_zero"), "{stdout}");

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["scenario"], "minkowski5");
    assert_eq!(report["metadata"]["seed"], 0);
    assert!(report["metadata"]["lorentz_sign"].is_string());
    assert!(report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .all(|e| e["verdict"] == "pass"));
}

#[test]
fn tightened_tolerance_fails_with_exit_one() {
    let o = mfb(&[
        "verify",
        "flat_kk",
        "--suite",
        "bianchi",
        "--tol",
        "bianchi.fd_cross_check=0",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL bianchi.fd_cross_check"));
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(mfb(&["verify", "no_such_scenario"]).status.code(), Some(2));
    assert_eq!(mfb(&["verify", "minkowski5", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(
        mfb(&["verify", "minkowski5", "--tol", "missing_equals"]).status.code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"name": "x", "coordinates": ["t"], "metric": {"diagonal": ["-1 + q"]}, "signature": [1, 0]}"#,
    )
    .unwrap();
    let o = mfb(&["verify", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("parse error"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn json_scenario_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plane.json");
    std::fs::write(
        &path,
        r#"{"name": "plane", "coordinates": ["x", "y"], "metric": {"diagonal": ["1", "1"]}, "signature": [0, 2], "expect": {"flat": true}}"#,
    )
    .unwrap();
    let o = mfb(&["verify", path.to_str().unwrap(), "--suite", "curvature"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn integrate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = mfb(&[
        "integrate",
        "flat_kk",
        "--start",
        "0,0,0,0,0",
        "--tend",
        "1",
        "--step",
        "0.01",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("t,chart,t,x,y,z,u"));
    assert_eq!(lines.count(), 101);
}

#[test]
fn spectrum_and_average_print_json() {
    let o = mfb(&[
        "spectrum",
        "minkowski5",
        "--fiber",
        "s1",
        "--at",
        "0,0,0,0,0",
        "--resolution",
        "128",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sp: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((sp["eigenvalues"][1].as_f64().unwrap() - 1.0).abs() < 1e-3);

    let o = mfb(&["spectrum", "product_r13_s1_s3", "--fiber", "s3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sp: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((sp["eigenvalues"][1].as_f64().unwrap() - 0.75).abs() < 1e-8);

    let o = mfb(&["average", "u_periodic", "--at", "0,0.3,0,0,0", "--nodes", "32"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let avg: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((avg["metric"][6].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn spectrum_without_bundle_exits_two() {
    assert_eq!(mfb(&["spectrum", "round_s3", "--fiber", "s3"]).status.code(), Some(2));
}
