use std::path::{Path, PathBuf};

use proptest::prelude::*;
use serde_json::Value;

use tlsopt_core::benchmark::MonitorSchedule;
use tlsopt_core::config::{from_json_str, Command, EnvironmentSource, RunConfig};
use tlsopt_core::io::{read_table, HASH_PREFIX};
use tlsopt_core::optimizer::SweepPlan;
use tlsopt_core::runner::{execute, run, RunResult};

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(validator: &jsonschema::Validator, doc: &Value, what: &str) {
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{what}: {errors:?}");
}

fn small_campaign(seed: u64, out: Option<PathBuf>) -> RunConfig {
    let mut cfg = RunConfig::new(Command::Campaign);
    cfg.seed = seed;
    cfg.campaign.frequencies = 3;
    cfg.campaign.schedule = MonitorSchedule {
        window_s: 60.0,
        sample_interval_s: 2.0,
    };
    cfg.plan = SweepPlan::new(-3e4, 3e4, 5e3);
    cfg.output_dir = out;
    cfg
}

#[test]
fn campaign_summary_is_byte_identical_across_runs() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let texts: Vec<String> = dirs
        .iter()
        .map(|d| {
            run(&small_campaign(4, Some(d.path().to_path_buf()))).unwrap();
            std::fs::read_to_string(d.path().join("summary.json")).unwrap()
        })
        .collect();
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn campaign_is_independent_of_thread_count() {
    let cfg = small_campaign(9, None);
    let record = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| serde_json::to_string(&execute(&cfg).unwrap().record).unwrap())
    };
    assert_eq!(record(1), record(3));
}

#[test]
fn every_command_writes_valid_artifacts() {
    let record_schema = schema("run_record.schema.json");
    let config_schema = schema("run_config.schema.json");
    let meta_schema = schema("run_metadata.schema.json");
    let env_schema = schema("environment.schema.json");
    for command in Command::ALL {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = match command {
            Command::Campaign => small_campaign(1, None),
            c => RunConfig::new(c),
        };
        cfg.command = command;
        cfg.schedule = MonitorSchedule {
            window_s: 60.0,
            sample_interval_s: 2.0,
        };
        cfg.plan = SweepPlan::new(-3e4, 3e4, 5e3);
        cfg.spectroscopy.freq_points = 21;
        cfg.spectroscopy.field_points = 11;
        cfg.output_dir = Some(dir.path().to_path_buf());
        let (out, _, written) = run(&cfg).unwrap();
        let name = command.name();

        let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_valid(&record_schema, &summary, name);
        assert_valid(&config_schema, &summary["config"], name);
        let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
        assert_valid(&meta_schema, &meta, name);
        if command == Command::GenerateBath {
            let env: Value =
                serde_json::from_str(&std::fs::read_to_string(dir.path().join("environment.json")).unwrap()).unwrap();
            assert_valid(&env_schema, &env, name);
        }

        for path in written.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")) {
            let first = std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string();
            assert_eq!(first, format!("{HASH_PREFIX}{}", out.record.config_hash), "{}", path.display());
            let (hash, table) = read_table(path).unwrap();
            assert_eq!(hash, out.record.config_hash);
            assert!(!table.header.is_empty());
            assert!(table.rows.iter().all(|r| r.len() == table.header.len()));
        }
    }
}

#[test]
fn default_loss_budget_is_the_global_gate() {
    let out = execute(&RunConfig::new(Command::LossBudget)).unwrap();
    let RunResult::LossBudget(report) = out.record.result else { panic!("wrong result kind") };
    let total = report.budget.t1_total_ms.ms().unwrap();
    assert!((total / 6.0 - 1.0).abs() < 0.2, "{total} ms");
}

#[test]
fn environment_file_source_matches_inline_bath() {
    let generated = execute(&RunConfig::new(Command::GenerateBath)).unwrap().environment.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("env.json");
    std::fs::write(&path, serde_json::to_string(&generated).unwrap()).unwrap();

    let mut from_file = RunConfig::new(Command::Optimize);
    from_file.plan = SweepPlan::new(-3e4, 3e4, 5e3);
    from_file.environment = EnvironmentSource::File(path);
    let mut inline = from_file.clone();
    inline.environment = EnvironmentSource::Inline(generated);
    let a = execute(&from_file).unwrap().record.result;
    let b = execute(&inline).unwrap().record.result;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn bad_configs_are_rejected_before_running() {
    let mut cfg = RunConfig::new(Command::Optimize);
    cfg.plan.step_v_per_m = -1.0;
    assert!(execute(&cfg).is_err());
    let err = from_json_str::<RunConfig>(r#"{"command":"campaign","campaign":{"frequencies":"many"}}"#).unwrap_err();
    assert!(err.to_string().contains("campaign.frequencies"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips_through_json(
        seed in any::<u64>(), cmd in 0usize..6, f in 4.0f64..6.0, step in 100.0f64..1e4, n in 1usize..100,
    ) {
        let mut cfg = RunConfig::new(Command::ALL[cmd]);
        cfg.seed = seed;
        cfg.qubit_freq_ghz = f;
        cfg.plan = SweepPlan::new(-5e4, 5e4, step);
        cfg.campaign.frequencies = n;
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = from_json_str(&text).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back, cfg);
    }
}
