use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn coact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coact")).args(args).env("COACT_LOG_LEVEL", "error").output().unwrap()
}

fn asset(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join(rel).to_string_lossy().into_owned()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_report_and_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = coact(&["run", &asset("scenarios/planar_minimal.json"), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir.path().join("report.json"));
    assert_eq!(report["completed"], true);
    let log = std::fs::read_to_string(dir.path().join("events.ndjson")).unwrap();
    assert!(log.lines().count() > 10);
    for line in log.lines() {
        serde_json::from_str::<Value>(line).unwrap();
    }
}

#[test]
fn run_prints_the_report_without_out_dir() {
    let out = coact(&["run", &asset("scenarios/planar_minimal.json"), "--mode", "predictive"]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["execution_time"].as_f64().unwrap() > 0.0);
}

#[test]
fn compare_writes_both_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = coact(&["compare", &asset("scenarios/blocking.json"), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cmp = read_json(dir.path().join("comparison.json"));
    assert!(cmp["execution_time_delta"].is_number());
    assert!(dir.path().join("baseline.ndjson").exists());
    assert!(dir.path().join("predictive.ndjson").exists());
}

#[test]
fn anova_table() {
    let out = coact(&["anova", "--groups-file", &asset("anova/execution_times.json")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("17.06"), "{text}");

    let out = coact(&["anova", "--groups-file", &asset("anova/execution_times.json"), "--json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["f"].as_f64().unwrap() - 17.0645).abs() < 1e-3, "{v}");
}

#[test]
fn train_on_synthetic_data_saves_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let out = coact(&["train", "--synthetic", "600", "--seed", "3", "--max-epochs", "50", "--out", model.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("held-out accuracy"), "{text}");
    assert!(model.exists());
}

#[test]
fn replay_applies_a_recorded_stop() {
    let dir = tempfile::tempdir().unwrap();
    let record = dir.path().join("session.ndjson");
    std::fs::write(&record, "{\"tick\":5,\"msg\":{\"type\":\"control\",\"action\":\"stop\"}}\n").unwrap();
    let out = coact(&["run", &asset("scenarios/planar_minimal.json"), "--replay", record.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["tasks_completed"], 0);
    assert!(report["execution_time"].as_f64().unwrap() < 1.0, "{report}");
}

#[test]
fn exit_codes() {
    assert_eq!(coact(&[]).status.code(), Some(1));
    assert_eq!(coact(&["run"]).status.code(), Some(1));
    assert_eq!(coact(&["train", "--synthetic", "10", "--test-fraction", "1.5"]).status.code(), Some(1));
    assert_eq!(coact(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(coact(&["run", missing.to_str().unwrap()]).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": \"x\"}").unwrap();
    let out = coact(&["compare", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
