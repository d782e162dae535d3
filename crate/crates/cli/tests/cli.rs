use std::path::Path;
use std::process::{Command, Output};

use robustinfo::fixtures::case1_env;
use robustinfo::{check_policy, SequentialPolicy};

fn robustinfo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robustinfo"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn design_prints_threshold_policy() {
    let dir = tempfile::tempdir().unwrap();
    let out = robustinfo(&["design"], dir.path());
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["threshold_label"], "L");
}

#[test]
fn emitted_policy_round_trips_through_check() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&robustinfo(&["design", "--out", "art"], dir.path())), 0);
    let text = std::fs::read_to_string(dir.path().join("art/policy.json")).unwrap();
    let policy = SequentialPolicy::from_json(&text).unwrap();
    assert!(check_policy(&policy, &case1_env(), 1e-9).unwrap().pass);

    let out = robustinfo(&["check", "--policy", "art/policy.json"], dir.path());
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn run_writes_manifest_and_lp_for_case1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&robustinfo(&["run"], dir.path())), 0);
    let out = dir.path().join("out");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for name in ["design.json", "policy.json", "obedience.json", "lp.json", "lp_model.lp", "comparison.csv"] {
        assert!(listed.contains(&name), "{name} missing from {listed:?}");
        assert!(out.join(name).exists());
    }
    let csv = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(
        csv,
        "cost,robust_welfare,bce_predicted,bce_realized,theta_star,p_star,bce_threshold\n\
         2,8.052631579,9,0,L,0.6842105263,L\n"
    );
}

#[test]
fn public_evaluation_collapses() {
    let dir = tempfile::tempdir().unwrap();
    let out = robustinfo(&["evaluate", "--mode", "public"], dir.path());
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["expected_welfare"].as_f64(), Some(0.0));
}

#[test]
fn unknown_scenario_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = robustinfo(&["--scenario", "missing.json", "design"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn malformed_scenario_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"schema\": 1,\n  \"name\": \"x\",\n  \"n_agents\": \"three\"\n}\n").unwrap();
    let out = robustinfo(&["--scenario", "bad.json", "design"], dir.path());
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json"), "{err}");
}

#[test]
fn lp_beyond_enumeration_limit_is_capacity_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = robustinfo(&["--scenario", "case2", "lp"], dir.path());
    assert_eq!(code(&out), 3);
}

#[test]
fn run_skips_lp_with_note_when_too_large() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = r#"{
  "schema": 1,
  "name": "wide",
  "n_agents": 10,
  "states": [
    {"label": "L", "prob": 0.5, "b": 1.0, "lambda": 0.1, "alpha": 6.0},
    {"label": "H", "prob": 0.5, "b": 2.4, "lambda": 0.5, "alpha": 12.0}
  ],
  "cost": 2.0,
  "beta": 1.5,
  "modes": ["design", "lp"]
}"#;
    std::fs::write(dir.path().join("wide.json"), scenario).unwrap();
    assert_eq!(code(&robustinfo(&["--scenario", "wide.json", "run"], dir.path())), 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert!(manifest["notes"][0].as_str().unwrap().starts_with("lp skipped"));
    assert!(!dir.path().join("out/lp.json").exists());
}

#[test]
fn empty_modes_produce_only_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = r#"{
  "schema": 1,
  "name": "idle",
  "n_agents": 3,
  "states": [{"label": "K", "prob": 1.0, "b": 2.5, "lambda": 0.2, "alpha": 1.0}],
  "cost": 2.0,
  "beta": 1.0,
  "modes": []
}"#;
    std::fs::write(dir.path().join("idle.json"), scenario).unwrap();
    assert_eq!(code(&robustinfo(&["--scenario", "idle.json", "run"], dir.path())), 0);
    let names: Vec<_> = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, ["manifest.json"]);
}

#[test]
fn strict_mode_rejects_violated_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = r#"{
  "schema": 1,
  "name": "no-dominant-state",
  "n_agents": 3,
  "states": [{"label": "K", "prob": 1.0, "b": 1.0, "lambda": 0.5, "alpha": 1.0}],
  "cost": 2.0,
  "beta": 1.5
}"#;
    std::fs::write(dir.path().join("weak.json"), scenario).unwrap();
    assert_eq!(code(&robustinfo(&["--scenario", "weak.json", "--strict", "design"], dir.path())), 1);
    assert_eq!(code(&robustinfo(&["--scenario", "weak.json", "design"], dir.path())), 0);
}

#[test]
fn random_verification_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let out = robustinfo(&["--seed", "9", "lp", "--verify-random", "25"], dir.path());
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["instances"], 25);
    assert!(doc["disagreements"].as_array().unwrap().is_empty());
}
