use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use alterlink::explain::ExplanationRecord;
use alterlink_cli::{cmd_explain, cmd_resolve, cmd_train, CliError, RunConfig};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic")
}

fn fixture_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&fixture().join("config.toml")).unwrap();
    cfg.paths.out = out.to_path_buf();
    cfg
}

fn key_values(path: &Path) -> HashMap<String, String> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].to_string())
        })
        .collect()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alterlink"))
}

#[test]
fn reported_accuracy_matches_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    cmd_train(&cfg).unwrap();
    cmd_resolve(&cfg).unwrap();

    let mut truth = HashMap::new();
    let mut r = csv::Reader::from_path(fixture().join("truth.csv")).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        truth.insert(rec[0].to_string(), rec[5].to_string());
    }
    let log = std::fs::read_to_string(dir.path().join("resolutions.jsonl")).unwrap();
    let (mut hits, mut n) = (0usize, 0usize);
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let want = &truth[v["case_id"].as_str().unwrap()];
        let got = match v["kind"].as_str().unwrap() {
            "pair" => v["chosen"].as_str().unwrap().to_string(),
            _ => v["exists"].as_bool().unwrap().to_string(),
        };
        hits += (&got == want) as usize;
        n += 1;
    }
    assert_eq!(n, truth.len());
    let summary = key_values(&dir.path().join("resolve_summary.csv"));
    let reported: f64 = summary["accuracy"].parse().unwrap();
    assert!((reported - hits as f64 / n as f64).abs() < 1e-12, "{reported} vs {hits}/{n}");
}

#[test]
fn explanation_export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(dir.path());
    cfg.experiments.explain_cases = Some(4);
    cmd_train(&cfg).unwrap();
    cmd_explain(&cfg).unwrap();
    let text = std::fs::read_to_string(dir.path().join("explanations.jsonl")).unwrap();
    assert!(text.lines().count() > 0);
    for line in text.lines() {
        let rec: ExplanationRecord = serde_json::from_str(line).unwrap();
        assert!(rec.fidelity >= 0.0);
        let back: ExplanationRecord = serde_json::from_str(&serde_json::to_string(&rec).unwrap()).unwrap();
        assert_eq!(back, rec);
    }
}

#[test]
fn checkpoint_for_other_features_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    cmd_train(&cfg).unwrap();
    let mut other = cfg.clone();
    other.preprocess.exclude.push("Age".into());
    let err = cmd_resolve(&other).unwrap_err();
    assert_eq!(err.category(), "checkpoint", "{}", err.line());
    assert!(!dir.path().join("resolutions.jsonl").exists());
}

#[test]
fn risk_without_resolved_edges_names_the_fix() {
    let dir = tempfile::tempdir().unwrap();
    let err = alterlink_cli::cmd_risk(&fixture_config(dir.path())).unwrap_err();
    assert!(matches!(err, CliError::MissingInput(_)));
    assert!(err.line().starts_with("error[missing-input]: "));
    assert!(err.line().contains("alterlink resolve"));
}

#[test]
fn missing_schema_fails_with_one_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("config.toml");
    std::fs::write(
        &cfg_path,
        format!(
            "[paths]\nnodes = {:?}\nschema = \"nowhere.json\"\nedges = {:?}\n",
            fixture().join("nodes.csv"),
            fixture().join("edges.csv")
        ),
    )
    .unwrap();
    let out = bin().arg("--config").arg(&cfg_path).arg("train").output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    assert!(lines[0].starts_with("error[missing-input]: "), "{stderr}");
    assert!(lines[0].contains("nowhere.json"));
}

#[test]
fn single_node_network_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("nodes.csv"), "PID,Age\nA,30\n").unwrap();
    std::fs::write(dir.path().join("schema.json"), r#"{"pid_column": "PID", "columns": {"Age": "numeric"}}"#).unwrap();
    std::fs::write(dir.path().join("edges.csv"), "src,dst,confidence\n").unwrap();
    let cfg_path = dir.path().join("config.toml");
    std::fs::write(&cfg_path, "[paths]\nnodes = \"nodes.csv\"\nschema = \"schema.json\"\nedges = \"edges.csv\"\n").unwrap();
    let out = bin().arg("--config").arg(&cfg_path).arg("train").output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error[invalid]: "), "{stderr}");
}

#[test]
fn cli_run_writes_listed_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("--config")
        .arg(fixture().join("config.toml"))
        .arg("--out")
        .arg(dir.path())
        .arg("train")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let written: Vec<&str> = stdout.lines().filter_map(|l| l.strip_prefix("wrote ")).collect();
    assert!(written.iter().any(|p| p.ends_with("checkpoint.json")));
    for p in written {
        assert!(Path::new(p).is_file(), "{p}");
    }
}
