//! Harness plumbing tests: config grammar, record round-trips,
//! deterministic experiment execution, and end-to-end CLI behavior
//! (exit codes, CSV shapes, JSON mirrors, thread invariance).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;

use feedbacklab::Error;
use feedbacklab_cli::config::{ExperimentConfig, ResultRecord};
use feedbacklab_cli::runner::run_experiment;
use feedbacklab_cli::seeds::scenario_seed;
use proptest::prelude::*;

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("feedbacklab-test-{}-{name}", std::process::id()));
    p
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[test]
fn key_value_grammar_round_trips() {
    let text = "\
# experiment description
scenario = sk
trials = 4000
seed = 7

n        = 12
messages = 8
power    = 1.0
tolerance = 2.5
out = results.csv
";
    let cfg = ExperimentConfig::from_key_values(text).unwrap();
    assert_eq!(cfg.scenario, "sk");
    assert_eq!(cfg.trials, 4_000);
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.params["n"], 12.0);
    assert_eq!(cfg.params["messages"], 8.0);
    assert_eq!(cfg.tolerance, 2.5);
    assert_eq!(cfg.out.as_deref(), Some(std::path::Path::new("results.csv")));
    cfg.validate().unwrap();
}

#[test]
fn config_rejects_malformed_lines_and_values() {
    assert!(matches!(
        ExperimentConfig::from_key_values("just some words"),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(
        ExperimentConfig::from_key_values("trials = many"),
        Err(Error::Parameter(_))
    ));
    let mut cfg = ExperimentConfig::new("sk", 10, 0);
    assert!(cfg.set("power", "not-a-number").is_err());
}

#[test]
fn validation_catches_empty_and_zero() {
    let cfg = ExperimentConfig::new("", 10, 0);
    assert!(cfg.validate().is_err());
    let cfg = ExperimentConfig::new("sk", 0, 0);
    assert!(cfg.validate().is_err());
    let mut cfg = ExperimentConfig::new("sk", 10, 0);
    cfg.tolerance = 0.0;
    assert!(cfg.validate().is_err());
}

#[test]
fn overrides_replace_file_values() {
    let mut cfg = ExperimentConfig::from_key_values("scenario = sk\ntrials = 100\nseed = 1\n")
        .unwrap();
    cfg.set("trials", "999").unwrap();
    cfg.set("scenario", "ozarow").unwrap();
    assert_eq!(cfg.trials, 999);
    assert_eq!(cfg.scenario, "ozarow");
}

proptest! {
    #[test]
    fn config_json_round_trip(
        scenario in "[a-z][a-z-]{0,16}",
        trials in 1u64..1_000_000,
        seed in any::<u64>(),
        values in proptest::collection::btree_map("[a-z]{1,8}", -1e6f64..1e6, 0..6),
    ) {
        let mut cfg = ExperimentConfig::new(scenario, trials, seed);
        cfg.params = values;
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(cfg, back);
    }
}

#[test]
fn result_record_round_trips_and_compares() {
    let mut cfg = ExperimentConfig::new("sk", 100, 3);
    cfg.params.insert("n".into(), 10.0);
    let mut record = ResultRecord::new(&cfg);
    record.metrics.insert("error".into(), 0.25);
    record.wall_time_secs = 1.5;
    let json = serde_json::to_string_pretty(&record).unwrap();
    let back: ResultRecord = serde_json::from_str(&json).unwrap();
    assert!(record.same_outcome(&back));
    assert_eq!(back.wall_time_secs, 1.5);

    let mut other = back.clone();
    other.metrics.insert("error".into(), 0.5);
    assert!(!record.same_outcome(&other));
}

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

#[test]
fn scenario_seeds_are_frozen() {
    // Golden values: results recorded with these streams must stay
    // reproducible across releases.
    assert_eq!(scenario_seed(42, "ozarow"), scenario_seed(42, "ozarow"));
    let a = scenario_seed(42, "ozarow");
    let b = scenario_seed(42, "sk");
    let c = scenario_seed(43, "ozarow");
    assert!(a != b && a != c && b != c);
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

#[test]
fn runner_rejects_invalid_configs() {
    let cfg = ExperimentConfig::new("sk", 0, 0);
    assert!(run_experiment(&cfg).is_err());
    let cfg = ExperimentConfig::new("no-such-scenario", 10, 0);
    assert!(run_experiment(&cfg).is_err());
    // Missing parameters are reported, not defaulted.
    let cfg = ExperimentConfig::new("sk", 10, 0);
    assert!(matches!(run_experiment(&cfg), Err(Error::Parameter(_))));
}

fn sk_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new("sk", 2_000, 11);
    cfg.params.insert("n".into(), 10.0);
    cfg.params.insert("messages".into(), 4.0);
    cfg.params.insert("power".into(), 1.0);
    cfg
}

#[test]
fn repeated_runs_are_identical() {
    let cfg = sk_config();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert!(a.same_outcome(&b));
    assert!(a.metrics.contains_key("error"));
    assert!(a.metrics.contains_key("power"));
    assert!(a.all_passed(), "{:?}", a.checks);
}

#[test]
fn power_control_record_has_the_documented_schema() {
    let mut cfg = ExperimentConfig::new("su-power-control", 5_000, 11);
    cfg.params.insert("n".into(), 100.0);
    cfg.params.insert("power".into(), 1.0);
    cfg.params.insert("eps".into(), 0.2);
    let record = run_experiment(&cfg).unwrap();
    for key in ["error", "power", "message_count_ln", "boosted_count_ln"] {
        assert!(record.metrics.contains_key(key), "missing metric {key}");
    }
    assert!(record.all_passed(), "{:?}", record.checks);
}

// ---------------------------------------------------------------------------
// CLI end to end
// ---------------------------------------------------------------------------

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_feedbacklab"))
}

#[test]
fn capacity_prints_the_golden_value() {
    let out = cli().args(["capacity", "--snr", "1"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.346574");
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = cli()
        .args(["capacity", "--snr", "1", "--no-such-flag"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let out = cli().args(["no-such-subcommand"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_parameter_values_are_usage_errors() {
    let out = cli().args(["capacity", "--snr", "-3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn region_csv_has_grid_plus_one_rows() {
    let path = temp_path("region.csv");
    let out = cli()
        .args([
            "region-mac",
            "--p1",
            "1",
            "--p2",
            "1",
            "--eps",
            "0",
            "--grid",
            "1001",
            "--out",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rho,r1_max,r2_max,sum_max");
    assert_eq!(lines.len() - 1, 1_002, "grid rows plus the inserted rho*");
    std::fs::remove_file(&path).ok();
}

#[test]
fn bounds_csv_has_documented_columns() {
    let path = temp_path("curve.csv");
    let json = temp_path("curve.json");
    let out = cli()
        .args([
            "bounds-su",
            "--power",
            "1",
            "--eps",
            "0.1",
            "--n",
            "1000,100000000",
        ])
        .arg("--out")
        .arg(&path)
        .arg("--json")
        .arg(&json)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "n,lower,upper,lower_per_n,upper_per_n,eps_capacity"
    );
    assert_eq!(lines.len(), 3);
    // Converse is vacuous at n = 1000 for these parameters: empty cell.
    assert!(lines[1].starts_with("1000,"));
    // The JSON mirror parses and matches the row count.
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    std::fs::remove_file(&path).ok();
    std::fs::remove_file(&json).ok();
}

#[test]
fn simulation_is_thread_count_invariant() {
    let run = |threads: &str, tag: &str| -> serde_json::Value {
        let json = temp_path(&format!("sim-{tag}.json"));
        let out = cli()
            .env("FEEDBACKLAB_THREADS", threads)
            .args([
                "simulate-su",
                "--n",
                "12",
                "--power",
                "1",
                "--messages",
                "8",
                "--trials",
                "4000",
                "--seed",
                "9",
            ])
            .arg("--json")
            .arg(&json)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
        std::fs::remove_file(&json).ok();
        v
    };
    let a = run("1", "a");
    let b = run("4", "b");
    assert_eq!(a["metrics"], b["metrics"]);
    assert_eq!(a["checks"], b["checks"]);
}

#[test]
fn config_file_supplies_flag_defaults() {
    let cfg_path = temp_path("defaults.cfg");
    std::fs::write(&cfg_path, "snr = 3\n").unwrap();
    let out = cli()
        .args(["capacity", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.693147");

    // Explicit flags win over the file.
    let out = cli()
        .args(["capacity", "--snr", "1", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.346574");
    std::fs::remove_file(&cfg_path).ok();
}

#[test]
fn transcript_dump_has_documented_columns() {
    let dump = temp_path("dump.csv");
    let out = cli()
        .args([
            "simulate-mac",
            "--n",
            "50",
            "--p1",
            "1",
            "--p2",
            "1",
            "--eps",
            "0.1",
            "--trials",
            "2000",
            "--seed",
            "3",
        ])
        .arg("--dump")
        .arg(&dump)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&dump).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial,k,x1,x2,z,y");
    // 32 dumped trials x (n + 1) channel uses.
    assert_eq!(lines.len() - 1, 32 * 51);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first.len(), 6);
    assert_eq!(first[0], "0");
    assert_eq!(first[1], "0");
    std::fs::remove_file(&dump).ok();
}

#[test]
fn verify_lemmas_passes_and_mirrors_json() {
    let json = temp_path("lemmas.json");
    let out = cli()
        .args(["verify-lemmas", "--seed", "42"])
        .arg("--json")
        .arg(&json)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["passed"], serde_json::Value::Bool(true));
    std::fs::remove_file(&json).ok();
}

#[test]
fn accept_rejects_unknown_suites() {
    let out = cli()
        .args(["accept", "--suite", "exotic"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn metrics_are_ordered_maps() {
    // BTreeMap keys serialize in a stable order, keeping JSON diffs
    // meaningful across runs.
    let mut m = BTreeMap::new();
    m.insert("z", 1.0);
    m.insert("a", 2.0);
    let json = serde_json::to_string(&m).unwrap();
    assert!(json.find("\"a\"").unwrap() < json.find("\"z\"").unwrap());
}
