use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ecoc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecoc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ecoc(dir, args);
    assert!(
        out.status.success(),
        "ecoc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn datasets(dir: &Path) {
    ok(dir, &["gen-data", "--k", "6", "--per-class", "20", "--seed", "1", "--out", "train.txt"]);
    ok(dir, &["gen-data", "--k", "6", "--per-class", "10", "--seed", "2", "--out", "test.txt"]);
}

#[test]
fn matrix_pipeline_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    datasets(dir);
    assert_eq!(std::fs::read_to_string(dir.join("train.txt")).unwrap().lines().count(), 120);

    ok(dir, &["gen-codebook", "--kind", "dense", "--k", "6", "--l", "5", "--trials", "100", "--out", "cb.txt"]);
    ok(dir, &["metric", "--source", "means", "--data", "train.txt", "--out", "means.txt"]);
    ok(dir, &["assign", "--policy", "local-min", "--codebook", "cb.txt", "--metric", "means.txt", "--out", "a.txt"]);
    ok(dir, &["assign", "--policy", "exhaustive", "--codebook", "cb.txt", "--metric", "means.txt", "--out", "best.txt"]);
    ok(dir, &[
        "train", "--data", "train.txt", "--codebook", "cb.txt", "--assignment", "a.txt",
        "--epochs", "5", "--out", "model.json",
    ]);
    let stdout = ok(dir, &["eval", "--model", "model.json", "--data", "test.txt", "--labels-from", "train.txt"]);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(report["bound"].as_f64().unwrap() >= 0.0);

    ok(dir, &[
        "exhaustive-study", "--data", "train.txt", "--test", "test.txt", "--codebook", "cb.txt",
        "--metric", "means=means.txt", "--sample", "50", "--epochs", "3",
        "--out-summary", "sum.json", "--out-records", "rec.csv", "--out-density", "dens.csv",
    ]);
    assert_eq!(json(&dir.join("sum.json"))["records"], 50);
    let records = std::fs::read_to_string(dir.join("rec.csv")).unwrap();
    assert_eq!(records.lines().next(), Some("assignment,accuracy,epsilon,s_cc_means"));
    assert_eq!(records.lines().count(), 51);

    let stdout = ok(dir, &["cv", "--data", "train.txt", "--codebook", "cb.txt", "--grid", "0.1,1", "--folds", "2", "--epochs", "3"]);
    let cv: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(cv["grid"].as_array().unwrap().len(), 2);
}

#[test]
fn graph_pipeline_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    datasets(dir);
    ok(dir, &["gen-codebook", "--kind", "wltls", "--k", "6", "--b", "2", "--out", "dag.txt", "--codebook-out", "dagcb.txt"]);
    ok(dir, &["metric", "--source", "means", "--data", "train.txt", "--out", "means.txt"]);
    ok(dir, &["taxonomy", "--data", "train.txt", "--out", "tax.txt"]);
    ok(dir, &["assign", "--policy", "dag", "--graph", "dag.txt", "--taxonomy", "tax.txt", "--out", "a.txt"]);
    ok(dir, &[
        "train", "--data", "train.txt", "--graph", "dag.txt", "--assignment", "a.txt",
        "--learner", "arow", "--out", "model.json",
    ]);
    ok(dir, &[
        "eval", "--model", "model.json", "--data", "test.txt", "--labels-from", "train.txt",
        "--graph-decode", "--loss", "exp", "--report", "r.json",
    ]);
    assert!(json(&dir.join("r.json"))["accuracy"].as_f64().is_some());

    ok(dir, &[
        "compare", "--data", "train.txt", "--test", "test.txt", "--graph", "dag.txt",
        "--metric", "means.txt", "--taxonomy", "tax.txt", "--policies", "random,dag",
        "--repeats", "2", "--restarts", "3", "--epochs", "3", "--out", "table.csv", "--runs-out", "runs.json",
    ]);
    let table = std::fs::read_to_string(dir.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert_eq!(json(&dir.join("runs.json")).as_array().unwrap().len(), 4);
}

#[test]
fn confusion_and_embedding_metrics_are_written() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    datasets(dir);
    ok(dir, &["metric", "--source", "confusion", "--data", "train.txt", "--epochs", "3", "--out", "conf.txt"]);
    let lines: Vec<String> = (0..6).map(|c| format!("{c} {c} {} 0.5", c * c % 5)).collect();
    std::fs::write(dir.join("emb.txt"), lines.join("\n")).unwrap();
    ok(dir, &["metric", "--source", "embeddings", "--data", "train.txt", "--embeddings", "emb.txt", "--out", "emb_metric.txt"]);
    for name in ["conf.txt", "emb_metric.txt"] {
        let m = ecoc::metrics::ClassMetric::load(dir.join(name)).unwrap();
        let norm = m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12, "{name}: norm {norm}");
    }
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = ecoc(dir, &["metric", "--source", "means", "--data", "missing.txt", "--out", "m.txt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));

    std::fs::write(dir.join("bad.txt"), "++\n+x\n").unwrap();
    datasets(dir);
    let out = ecoc(dir, &["train", "--data", "train.txt", "--codebook", "bad.txt", "--out", "m.json"]);
    assert!(!out.status.success());
    assert!(!dir.join("m.json").exists());
}
