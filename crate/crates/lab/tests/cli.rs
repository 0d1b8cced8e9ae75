//! Exit codes and outputs of the `pucci-lab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pucci-lab")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn check_on_the_counterexample_config_succeeds() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("counterexample.json");
    let o = lab(&["check", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("check,passed,"));
    assert!(csv.contains("\nextended,true,"));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["provenance"]["scenario"], "class_check");
    assert_eq!(json["provenance"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(json["provenance"]["tolerances"]["class_tolerance"], 1e-9);
}

#[test]
fn missing_config_names_the_path() {
    let o = lab(&["solve", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/cfg.json"), "{}", stderr(&o));
}

#[test]
fn cfl_violation_echoes_the_ratio() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("solve_cfl_violation.json");
    let o = lab(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("tau/h^2 = 1 ") && err.contains("0.1875"), "{err}");
    assert!(!out.path().join("report.csv").exists());
}

#[test]
fn unknown_flag_prints_usage() {
    let o = lab(&["check", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    let o = lab(&["transmogrify"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_config_keys_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"grid": {"n_dim": 2, "h": 0.125, "tau": 0.0078125}, "sed": 1}"#);
    let o = lab(&["decay", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sed"), "{}", stderr(&o));
}

#[test]
fn negative_delta_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"grid": {"n_dim": 2, "h": 0.125, "tau": 0.0078125}, "params": {"delta_list": [0.1, -0.2]},
            "data": {"g": {"kind": "kinked"}}}"#,
    );
    let o = lab(&["sweep-ellipticity", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("delta_list"), "{}", stderr(&o));
}

#[test]
fn empty_p_list_gives_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"grid": {"n_dim": 2, "h": 0.125, "tau": 0.0078125}}"#);
    let out = dir.path().join("out");
    let o = lab(&["sweep-p", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("p,status,"));
}

#[test]
fn unresolvable_depth_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"grid": {"n_dim": 2, "h": 0.0625, "tau": 0.0625, "stagger": true},
            "params": {"delta": 0.2}, "analysis": {"depth": 10}}"#,
    );
    let o = lab(&["counterexample", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn solve_writes_the_solution_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"grid": {"n_dim": 1, "h": 0.125, "tau": 0.00390625, "time_extent": 0.25},
            "operator": {"type": "heat"}, "data": {"g": {"kind": "smooth"}}}"#,
    );
    let out = dir.path().join("out");
    let o = lab(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let u = pucci_core::grid::read_gridfn(out.join("solution.gf")).unwrap();
    assert_eq!(u.grid().spec().h, 0.125);
}
