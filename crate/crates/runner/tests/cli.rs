use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn plmpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plmpc")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

fn run_tiny(out: &Path, iterations: &str) -> Output {
    plmpc(&["run", "--config", &config("tiny.toml"), "--out", out.to_str().unwrap(), "--iterations", iterations, "--seed", "3"])
}

#[test]
fn run_report_verify_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_tiny(dir.path(), "2");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("iteration   2"));

    let o = plmpc(&["report", "--run", dir.path().to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().next(), fs::read_to_string(dir.path().join("costs.csv")).unwrap().lines().next());

    let o = plmpc(&["report", "--run", dir.path().to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);

    let o = plmpc(&["verify", "--run", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&plmpc(&[])), 1);
    assert_eq!(code(&plmpc(&["run"])), 1);
    assert_eq!(code(&plmpc(&["run", "--config", "/nonexistent.toml", "--out", "/tmp/x"])), 1);
    assert_eq!(code(&plmpc(&["run", "--config", &config("tiny.toml"), "--scenario", "greenhouse"])), 1);
    assert_eq!(code(&plmpc(&["report", "--run", "/nonexistent", "--format", "csv"])), 1);
    assert_eq!(code(&plmpc(&["report", "--run", "/tmp", "--format", "xml"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let o = plmpc(&["run", "--config", &config("tiny.toml"), "--out", dir.path().to_str().unwrap(), "--iterations", "0"]);
    assert_eq!(code(&o), 1);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "iterations = \"many\"\n").unwrap();
    assert_eq!(code(&plmpc(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])), 1);
    assert_eq!(code(&plmpc(&["--help"])), 0);
}

#[test]
fn invariant_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = plmpc(&["run", "--config", &config("building.toml"), "--out", dir.path().to_str().unwrap(), "--iterations", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tightened constraints are empty"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("manifest.json").is_file());
    assert_eq!(code(&plmpc(&["verify", "--run", dir.path().to_str().unwrap()])), 2);

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_tiny(dir.path(), "1")), 0);
    fs::write(dir.path().join("trajectory_1.csv"), "t\n0\n").unwrap();
    let o = plmpc(&["verify", "--run", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL artifact digests"));
}

#[test]
fn scenario_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = plmpc(&[
        "run",
        "--config",
        &config("building.toml"),
        "--scenario",
        "tiny",
        "--iterations",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scenario"], "tiny");
}

#[test]
fn cli_output_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&run_tiny(a.path(), "2")), 0);
    assert_eq!(code(&run_tiny(b.path(), "2")), 0);
    for name in ["costs.csv", "summary.json", "manifest.json", "trajectory_2.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}
