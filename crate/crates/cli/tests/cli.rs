use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tlsopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlsopt"))
        .args(args)
        .env_remove("TLSOPT_OUT_DIR")
        .output()
        .unwrap()
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

fn assert_valid(schema_file: &str, doc: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(schema_file);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:?}");
}

const SMALL_CAMPAIGN: &[&str] = &["campaign", "--frequencies", "3", "--window", "60", "--interval", "2", "--seed", "5"];

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = tlsopt(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = json(&out.stderr);
    assert_valid("error.schema.json", &err);
    assert_eq!(err["error"]["kind"], "usage");
}

#[test]
fn schema_violation_reports_the_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"command":"optimize","plan":{"stepp":1000}}"#).unwrap();
    let out = tlsopt(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = json(&out.stderr);
    assert_valid("error.schema.json", &err);
    assert_eq!(err["error"]["path"], "plan.stepp");
}

#[test]
fn loss_budget_prints_the_global_gate_budget() {
    let out = tlsopt(&["loss-budget"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let record = json(&out.stdout);
    assert_valid("run_record.schema.json", &record);
    let total = record["result"]["budget"]["t1_total_ms"].as_f64().unwrap();
    assert!((total / 6.0 - 1.0).abs() < 0.2, "{total}");
}

#[test]
fn loss_budget_area_sweep_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlsopt(&[
        "loss-budget",
        "--mode",
        "rf_50ohm",
        "--sweep-area",
        "1e-8:1e-4:21",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("area_sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 2 + 21);
}

#[test]
fn output_directory_from_environment_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tlsopt"))
        .args(SMALL_CAMPAIGN)
        .env("TLSOPT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["summary.json", "metadata.json", "campaign.csv", "ensemble_gain.csv"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    assert_valid("run_metadata.schema.json", &json(&std::fs::read(dir.path().join("metadata.json")).unwrap()));

    let report = tlsopt(&["report", dir.path().to_str().unwrap()]);
    assert!(report.status.success());
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("campaign") && text.contains("ok"), "{text}");
    assert!(!text.contains("MISMATCH"), "{text}");
}

#[test]
fn campaign_output_is_deterministic() {
    let a = tlsopt(SMALL_CAMPAIGN);
    let b = tlsopt(&[SMALL_CAMPAIGN, &["--threads", "2"]].concat());
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let record = json(&a.stdout);
    assert_valid("run_record.schema.json", &record);
    assert_valid("run_config.schema.json", &record["config"]);
    assert_eq!(record["result"]["stats"]["records"], 3);
}

#[test]
fn generated_bath_is_a_valid_environment_and_can_be_reused() {
    let out = tlsopt(&["generate-bath", "--seed", "3"]);
    assert!(out.status.success());
    let env = json(&out.stdout);
    assert_valid("environment.schema.json", &env);

    let dir = tempfile::tempdir().unwrap();
    let env_path = dir.path().join("env.json");
    std::fs::write(&env_path, &out.stdout).unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let cfg = serde_json::json!({
        "command": "optimize",
        "environment": {"file": env_path},
        "plan": {"start_v_per_m": -2e4, "stop_v_per_m": 2e4, "step_v_per_m": 5e3},
    });
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let run = tlsopt(&["run", "--config", cfg_path.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(json(&run.stdout)["result"]["kind"], "optimize");
}
