use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn moments(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moments")).args(args).env_remove("MOMENTS_THREADS").output().unwrap()
}

fn run_fixture(name: &str, out: &Path) -> Output {
    moments(&["run", fixture(name).to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn report(out: &Path, stem: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(format!("{stem}.report.json"))).unwrap()).unwrap()
}

#[test]
fn trace_fixture_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fixture("trace.json", dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "trace");
    assert_eq!(r["kind"], "trace");
    assert_eq!(r["passed"], true);
    assert_eq!(r["result"]["value"], 5.0);
    assert!(dir.path().join("trace.meta.json").exists());
}

#[test]
fn every_passing_fixture_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    for name in [
        "construct_q.json",
        "carleman_exp_square.json",
        "carleman_gaussian.json",
        "tilde_trace.json",
        "gaussian.json",
        "fundamental_lemma.json",
        "concentration.json",
        "main_theorem.json",
    ] {
        let out = run_fixture(name, dir.path());
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(dir.path().join("main_theorem.stages.csv").exists());
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_fixture("malformed.json", dir.path()).status.code(), Some(2));
    assert_eq!(moments(&["validate", fixture("malformed.json").to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(moments(&["run", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn violated_module_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fixture("main_theorem_violation.json", dir.path());
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path(), "main_theorem_violation");
    assert_eq!(r["passed"], false);
    assert!(!r["failures"].as_array().unwrap().is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn validate_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "{}").unwrap();
    let out = moments(&["validate", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kind") && err.contains("parameters"), "{err}");

    let typo = dir.path().join("typo.json");
    std::fs::write(&typo, r#"{"kind": "trcae", "parameters": {}}"#).unwrap();
    let err = String::from_utf8_lossy(&moments(&["validate", typo.to_str().unwrap()]).stderr).to_string();
    assert!(err.contains("did you mean \"trace\""), "{err}");

    assert_eq!(moments(&["validate", fixture("main_theorem.json").to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn reports_are_byte_identical_across_runs_and_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for name in ["main_theorem.json", "gaussian.json"] {
        let cfg = fixture(name);
        let one = moments(&["run", cfg.to_str().unwrap(), "--out", a.path().to_str().unwrap(), "--threads", "1"]);
        let four = moments(&["run", cfg.to_str().unwrap(), "--out", b.path().to_str().unwrap(), "--threads", "4"]);
        assert_eq!(one.status.code(), Some(0));
        assert_eq!(four.status.code(), Some(0));
        let stem = name.trim_end_matches(".json");
        let ra = std::fs::read(a.path().join(format!("{stem}.report.json"))).unwrap();
        let rb = std::fs::read(b.path().join(format!("{stem}.report.json"))).unwrap();
        assert_eq!(ra, rb, "{name}");
    }
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = moments(&["run", fixture("gaussian.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed", "77"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(dir.path(), "gaussian")["seed"], 77);
}

#[test]
fn list_names_every_kind() {
    let out = moments(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for kind in ["trace", "gaussian", "fundamental_lemma", "concentration", "main_theorem", "carleman", "tilde_trace", "construct_q"] {
        assert!(text.lines().any(|l| l.starts_with(kind)), "{kind}");
    }
}
