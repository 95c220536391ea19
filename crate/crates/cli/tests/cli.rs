use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_humanoid-agent")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn office_json() -> &'static str {
    include_str!("../../core/scenarios/office.json")
}

#[test]
fn run_writes_traces_that_report_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let table = stdout(&bin(&["run", "--task", "navigate_table", "--episodes", "3", "--seed", "5", "--out", out]));
    assert!(table.contains("navigate_table"));
    let traces = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "jsonl")).count();
    assert_eq!(traces, 3);
    assert!(dir.path().join("report.json").exists());

    let again = stdout(&bin(&["report", "--traces", out]));
    assert_eq!(again, table);
    let json: serde_json::Value = serde_json::from_str(&stdout(&bin(&["report", "--traces", out, "--json"]))).unwrap();
    assert_eq!(json["cells"][0]["episodes"], 3);
}

#[test]
fn matrix_runs_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("matrix.json");
    std::fs::write(&cfg, r#"{"episodes_per_cell": 2, "cells": [{"task": "navigate_table"}, {"task": "navigate_table", "connector_enabled": false}]}"#).unwrap();
    let table = stdout(&bin(&["matrix", "--config", cfg.to_str().unwrap()]));
    assert!(table.contains("connector/adjust/active"));
    assert!(table.contains("no-connector/adjust/active"));
}

#[test]
fn dump_skills_lists_the_library() {
    let text = stdout(&bin(&["dump-skills"]));
    for s in ["go_straight", "turn_left", "grasp_bottle", "move_towards"] {
        assert!(text.contains(s), "{s} missing");
    }
    let json: serde_json::Value = serde_json::from_str(&stdout(&bin(&["dump-skills", "--json"]))).unwrap();
    assert!(json.to_string().contains("grasp_bottle"));
}

#[test]
fn validate_scenario_accepts_office_and_rejects_broken_maps() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, office_json()).unwrap();
    assert!(stdout(&bin(&["validate-scenario", good.to_str().unwrap()])).starts_with("ok: office"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, office_json().replace("\"position\": [8, 14]", "\"position\": [80, 14]")).unwrap();
    let o = bin(&["validate-scenario", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!o.stderr.is_empty());
}

#[test]
fn bad_arguments_fail_cleanly() {
    assert!(!bin(&["run", "--task", "no_such_task"]).status.success());
    assert!(!bin(&["run", "--task", "navigate_table", "--camera", "fixed:3"]).status.success());
    assert!(!bin(&["run", "--task", "navigate_table", "--backend", "remote"]).status.success());
    assert!(!bin(&["report", "--traces", Path::new("/nonexistent/dir").to_str().unwrap()]).status.success());
}
