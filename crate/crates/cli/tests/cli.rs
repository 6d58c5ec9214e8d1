use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn moran(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moran")).args(args).output().unwrap()
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    moran(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn minimal_config_writes_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("simulate", &configs().join("finite_minimal.json"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("counts.csv")).unwrap();
    assert!(csv.starts_with("n_0,n_1,count,frequency\n"));
    assert_eq!(csv.lines().count(), 4);
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["samples"], 5000);
}

#[test]
fn short_chain_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let text = std::fs::read_to_string(configs().join("finite_minimal.json"))
        .unwrap()
        .replace("\"samples\": 5000, \"thin\": 20", "\"steps\": 10, \"burn_in\": 10");
    std::fs::write(&cfg, text).unwrap();
    let out = run("simulate", &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:6:"), "{err}");
    assert!(err.contains("burn_in"), "{err}");
}

#[test]
fn malformed_json_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    std::fs::write(&cfg, "{\n  \"seed\": 1,\n  \"space\": {\"kind\": \"finite\", \"k\": }\n}\n").unwrap();
    let out = run("oracle", &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.json:3:"));
}

#[test]
fn missing_seed_is_rejected_unless_given_on_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("noseed.json");
    let text = std::fs::read_to_string(configs().join("finite_minimal.json"))
        .unwrap()
        .replace("\"seed\": 1,", "");
    std::fs::write(&cfg, text).unwrap();
    let out = run("simulate", &cfg, &dir.path().join("a"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    let with_flag = moran(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("b").to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert!(with_flag.status.success());
    assert_eq!(json(&dir.path().join("b/summary.json"))["seed"], 3);
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.json");
    let text = std::fs::read_to_string(configs().join("finite_minimal.json"))
        .unwrap()
        .replace("\"oracle\": {\"n\": 2}", "\"oracle\": {\"n\": 2000000}");
    std::fs::write(&cfg, text).unwrap();
    let out = run("oracle", &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oracle_of_the_flat_two_allele_urn() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("oracle", &configs().join("finite_minimal.json"), dir.path());
    assert!(out.status.success());
    let law = json(&dir.path().join("oracle.json"));
    for row in law["law"].as_array().unwrap() {
        assert!((row["probability"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn balance_report_is_tiny() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("balance", &configs().join("three_alleles.json"), dir.path());
    assert!(out.status.success());
    let report = json(&dir.path().join("balance.json"));
    assert_eq!(report["kernels"].as_array().unwrap().len(), 2);
    for k in report["kernels"].as_array().unwrap() {
        assert!(k["detailed_balance_residual"].as_f64().unwrap() < 1e-12);
    }
}

#[test]
fn limit_in_the_atom_regime() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("limit", &configs().join("atom_regime.json"), dir.path());
    assert!(out.status.success());
    let lim = json(&dir.path().join("limit.json"));
    assert_eq!(lim["regime"], "dp_lambda0_atom");
    assert_eq!(lim["theta_o"], 0.5);
    assert!(std::fs::read_to_string(dir.path().join("limit_cdf.csv")).unwrap().starts_with("x,cdf_left,cdf\n"));
}

#[test]
fn lambda0_example_reports_a_small_ks_distance() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("simulate", &configs().join("lambda0_interval.json"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["limit"]["regime"], "dp_lambda0_density");
    assert!(summary["limit"]["ks"].as_f64().unwrap() < 0.05);
    assert!(dir.path().join("values.csv").exists());
}

#[test]
fn timestamps_only_reach_the_log() {
    let dir = tempfile::tempdir().unwrap();
    run("oracle", &configs().join("finite_minimal.json"), dir.path());
    let log = std::fs::read_to_string(dir.path().join("run.log")).unwrap();
    assert!(log.contains("finish oracle ok"));
}
