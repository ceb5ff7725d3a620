use std::path::Path;
use std::process::Command;

fn gkls(out: &Path, args: &[&str]) -> (i32, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_gkls-sse"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap();
    (output.status.code().unwrap(), String::from_utf8(output.stdout).unwrap())
}

#[test]
fn classify_reports_and_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = gkls(dir.path(), &["classify", "thermal_qubit"]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(json.is_object());
    assert!(dir.path().join("thermal_qubit_classify.json").exists());
}

#[test]
fn simulate_writes_bloch_csv_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = gkls(dir.path(), &["--ntraj", "50", "simulate", "energy_damping_qubit", "--seed", "5", "--traj-dump"]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("energy_damping_qubit_ensemble.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,x1,x2,x3,mean_norm_sq");
    assert_eq!(csv.lines().count(), 1 + 801);
    assert!(dir.path().join("energy_damping_qubit_trajectory.csv").exists());
}

#[test]
fn compare_fails_under_a_tight_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--ntraj", "200", "--dt", "0.01", "compare", "phase_damping_qubit"];
    assert_eq!(gkls(dir.path(), &args).0, 0);
    let mut tight = vec!["--tol", "1e-6"];
    tight.extend_from_slice(&args);
    let (code, stdout) = gkls(dir.path(), &tight);
    assert_eq!(code, 1);
    let json: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(json["passed"], false);
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gkls(dir.path(), &["classify", "no_such_scenario"]).0, 2);
    assert_eq!(gkls(dir.path(), &["--ntraj", "0", "simulate", "thermal_qubit"]).0, 2);
    let matrix = dir.path().join("a.json");
    std::fs::write(&matrix, "[[[1,0],[0,0]],[[0,0],[-0.5,0]]]").unwrap();
    assert_eq!(gkls(dir.path(), &["noise-reduce", matrix.to_str().unwrap()]).0, 2);
}
