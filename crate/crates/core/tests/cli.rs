mod common;

use std::path::Path;
use std::process::{Command, Output};

fn stringnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stringnet")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_variant(dir: &Path, name: &str, edit: impl FnOnce(&mut serde_json::Value)) -> std::path::PathBuf {
    let mut v = common::reference_value();
    edit(&mut v);
    let path = dir.join(name);
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn run_reaches_done_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let reference = common::reference_path();
    let out = stringnet(&["run", path_str(&reference), "--out", path_str(dir.path()), "--svg"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("outcome: done"));
    for f in ["trajectory.csv", "paths.svg", "metrics.svg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn timeout_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let reference = common::reference_path();
    let out = stringnet(&["run", path_str(&reference), "--out", path_str(dir.path()), "--t-max", "5", "--dt", "0.02"]);
    assert_eq!(out.status.code(), Some(4));
    let rows = stringnet::output::read_trajectory(&dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 251);
    assert!(!dir.path().join("paths.svg").exists());
}

#[test]
fn breach_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_variant(dir.path(), "breach.json", |v| {
        v["attackers"] = serde_json::json!({
            "states": [
                { "position": [-6.0, 0.0], "velocity": [1.0, 0.0] },
                { "position": [-6.0, 1.5], "velocity": [1.0, 0.0] }
            ]
        });
    });
    let out = stringnet(&["run", path_str(&scenario), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn validate_reports_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let good = stringnet(&["validate", path_str(&common::reference_path())]);
    assert_eq!(good.status.code(), Some(0));

    let scenario = write_variant(dir.path(), "bad.json", |v| {
        v["herding"]["net_radius"] = serde_json::json!(7.0);
        v["herding"]["alpha2"] = serde_json::json!(1.2);
    });
    let out = stringnet(&["validate", path_str(&scenario)]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("net radius range"));
    assert!(stderr.contains("alpha2 range"));
}

#[test]
fn malformed_json_exits_2_and_missing_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ \"schema\": ").unwrap();
    assert_eq!(stringnet(&["validate", path_str(&path)]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(stringnet(&["validate", path_str(&missing)]).status.code(), Some(1));
}

#[test]
fn bound_prints_derived_quantities() {
    let out = stringnet(&["bound", path_str(&common::reference_path())]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("N_d_min = 3"));
    assert!(stdout.contains("b_d = "));
    assert!(stdout.contains("rho_bar = "));
}

#[test]
fn batch_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_variant(dir.path(), "short.json", |v| {
        v["sim"]["t_max"] = serde_json::json!(2.0);
    });
    let out = stringnet(&[
        "batch",
        path_str(&scenario),
        "--runs",
        "3",
        "--seed",
        "10",
        "--jobs",
        "2",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("batch_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().nth(1).unwrap().starts_with("0,10,timeout"));
}
