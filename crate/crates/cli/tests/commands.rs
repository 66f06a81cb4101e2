use std::path::Path;
use std::process::{Command, Output};

fn agh(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agh")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gap_prints_percent() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(stdout(&agh(&["gap", "110", "100"], dir.path())).trim(), "9.0909%");
}

#[test]
fn gen_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let listed = stdout(&agh(&["gen", "--preset", "AGH-mini", "--count", "2", "--constructible", "--out", "inst"], dir.path()));
    let first = listed.lines().next().unwrap().to_string();
    let out = agh(
        &["solve", "--instance", &first, "--operator", "vehicle-random", "--iterations", "3", "--out", "best.json", "--trace", "trace.csv"],
        dir.path(),
    );
    assert!(stdout(&out).contains("Vehicle-random"));
    assert!(dir.path().join("best.json").exists());
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4);
}

#[test]
fn policy_operator_needs_weights() {
    let dir = tempfile::tempdir().unwrap();
    let listed = stdout(&agh(&["gen", "--flights", "4", "--ops", "2", "--constructible", "--out", "inst"], dir.path()));
    let out = agh(&["solve", "--instance", listed.trim(), "--operator", "il-sample"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--weights"));
}

#[test]
fn unavailable_external_solver_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "name": "cli",
        "instances": {"kind": "Preset", "preset": "AGH-mini", "count": 2, "seed": 3},
        "methods": [
            {"name": "VR", "destroy": {"kind": "VehicleRandom"}, "repair": {"kind": "Matheuristic"},
             "destroy_degree": 0.4, "iterations": 3, "time_limit_s": 30, "repair_limit_s": 1},
            {"name": "Solver", "destroy": {"kind": "VehicleRandom"}, "repair": {"kind": "External", "command": "exit 1", "gap": 0.1},
             "destroy_degree": 0.4, "iterations": 3, "time_limit_s": 30, "repair_limit_s": 1}
        ],
        "seed": 1
    }"#;
    std::fs::write(dir.path().join("exp.json"), config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_agh"))
        .args(["eval", "exp.json", "--out", "res"])
        .env_remove("AGH_SOLVER_CMD")
        .current_dir(dir.path())
        .output()
        .unwrap();
    stdout(&out);
    let results = std::fs::read_to_string(dir.path().join("res/results.csv")).unwrap();
    assert_eq!(results.lines().filter(|l| l.contains(",unavailable")).count(), 2);
    assert_eq!(results.lines().filter(|l| l.contains(",ok,")).count(), 2);
}
