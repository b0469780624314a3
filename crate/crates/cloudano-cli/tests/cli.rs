//! Black-box tests of the installed binary: subcommand behavior, exit
//! codes, and byte-reproducibility of seeded runs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cloudano"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn gen_dataset(path: &Path, anomalies: usize, normals: usize) {
    let out = run(&[
        "gen",
        "--out",
        path.to_str().unwrap(),
        "--seed",
        "7",
        "--anomaly-cases",
        &anomalies.to_string(),
        "--normal-cases",
        &normals.to_string(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn gen_is_byte_reproducible_and_verify_certifies_it() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    gen_dataset(&first, 19, 30);
    gen_dataset(&second, 19, 30);
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());

    let out = run(&["verify", "--dataset", first.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("all 49 cases certified"));
}

#[test]
fn detect_with_the_mock_backend_names_the_planted_type() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("ds.json");
    gen_dataset(&dataset, 3, 3);
    let out = run(&[
        "detect",
        "--dataset",
        dataset.to_str().unwrap(),
        "--case",
        "case-a000-covert-miner",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        text.contains("case-a000-covert-miner: anomaly mine"),
        "{text}"
    );
    assert!(text.contains("flagged 1 of 1"));
}

#[test]
fn detect_mock_output_is_reproducible_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("ds.json");
    gen_dataset(&dataset, 3, 3);
    let args = ["detect", "--dataset", dataset.to_str().unwrap()];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn detect_with_the_real_backend_requires_the_key_variable() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("ds.json");
    gen_dataset(&dataset, 1, 1);
    let out = Command::new(env!("CARGO_BIN_EXE_cloudano"))
        .args([
            "detect",
            "--dataset",
            dataset.to_str().unwrap(),
            "--backend",
            "real",
        ])
        .env_remove("CLOUDANO_API_KEY")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("CLOUDANO_API_KEY"));
}

#[test]
fn eval_csv_is_reproducible_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("ds.json");
    gen_dataset(&dataset, 5, 5);
    let args = [
        "eval",
        "--dataset",
        dataset.to_str().unwrap(),
        "--detector",
        "rule-ensemble,never-anomaly",
        "--format",
        "csv",
    ];
    let first = run(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
    let text = stdout(&first);
    assert!(text.starts_with("detector_id,split,metric,value,case_count,repeats,seed\n"));
    assert!(text.contains("rule-ensemble,overall,anomaly_accuracy,100.00"));
    assert!(text.contains("never-anomaly,overall,normal_accuracy,100.00"));
}

#[test]
fn eval_pipeline_mock_scores_perfectly_with_types() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("ds.json");
    gen_dataset(&dataset, 5, 5);
    let out = run(&[
        "eval",
        "--dataset",
        dataset.to_str().unwrap(),
        "--detector",
        "pipeline-mock",
        "--repeats",
        "1",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("pipeline-mock,overall,type_accuracy,100.00"));
    assert!(text.contains("pipeline-mock,overall,false_positive_rate,0.00"));
}

#[test]
fn report_json_parses_and_carries_remediation() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("ds.json");
    gen_dataset(&dataset, 3, 3);
    let out = run(&[
        "report",
        "--dataset",
        dataset.to_str().unwrap(),
        "--case",
        "case-a000-covert-miner",
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let reports: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let report = &reports.as_array().unwrap()[0];
    assert_eq!(report["case_id"], "case-a000-covert-miner");
    assert!(report["summary"].as_str().unwrap().contains("mine"));
    assert!(!report["remediation"].as_array().unwrap().is_empty());
}

#[test]
fn export_ruleset_emits_all_ten_rules() {
    let out = run(&["export-ruleset"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["rules"].as_array().unwrap().len(), 10);
}

#[test]
fn bad_usage_exits_2_and_bad_data_exits_3() {
    let out = run(&["bogus-subcommand"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["detect", "--dataset", "/nonexistent/ds.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("error:"));

    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("ds.json");
    gen_dataset(&dataset, 1, 1);
    let out = run(&[
        "detect",
        "--dataset",
        dataset.to_str().unwrap(),
        "--case",
        "case-z999-missing",
    ]);
    assert_eq!(out.status.code(), Some(3));
}
