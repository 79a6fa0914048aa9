use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn censrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_censrank")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic dataset and its schema.
fn synth(dir: &Path, censor: &str) -> (PathBuf, PathBuf) {
    let csv = dir.join("synth.csv");
    let out = censrank(&["synth", "--n", "200", "--features", "3", "--censor-fraction", censor, "--seed", "1", "--scale", "60", "--out", path(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let schema = csv.with_extension("toml");
    (csv, schema)
}

const FAST: [&str; 6] = ["--hidden", "8", "--max-epochs", "3", "--bin-width", "10"];

fn error_line(out: &Output) -> serde_json::Value {
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

#[test]
fn km_curve_is_non_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = synth(dir.path(), "0.3");
    let out = censrank(&["km", "--dataset", path(&csv), "--schema", path(&schema), "--bin-width", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let col = reader.headers().unwrap().iter().position(|h| h == "survival").unwrap();
    let s: Vec<f64> = reader.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert!(!s.is_empty());
    assert!(s.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn train_then_evaluate_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = synth(dir.path(), "0.3");
    let ckpt = dir.path().join("model.bin");
    let preds = dir.path().join("scores.csv");
    let mut args = vec!["train", "--dataset", path(&csv), "--schema", path(&schema), "--loss", "cox-efron", "--lr", "1e-2"];
    args.extend(["--out", path(&ckpt), "--predictions", path(&preds)]);
    args.extend(["--hidden", "8", "--max-epochs", "10"]);
    let out = censrank(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ckpt.exists());
    let out = censrank(&["evaluate", "--dataset", path(&csv), "--schema", path(&schema), "--scores", path(&preds)]);
    assert!(out.status.success());
    let c: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!(c > 0.5 && c <= 1.0, "C-index {c}");
}

#[test]
fn cv_report_has_fold_rows_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = synth(dir.path(), "0.3");
    let grid = dir.path().join("grid.toml");
    std::fs::write(&grid, "learning_rate = [1e-3]\nl2 = [0.0]\n").unwrap();
    let mut args = vec!["cv", "--dataset", path(&csv), "--schema", path(&schema), "--loss", "rank-sigmoid", "--grid", path(&grid)];
    args.extend(FAST);
    let out = censrank(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "row,loss,fold,val_c_index,test_c_index,std_error,learning_rate,l2,best_epoch");
    assert_eq!(lines.len(), 1 + 5 + 1);
    assert!(lines[1..6].iter().all(|l| l.starts_with("fold,rank-sigmoid,")));
    assert!(lines[6].starts_with("aggregate,rank-sigmoid,"));
}

#[test]
fn ablation_emits_one_row_per_loss_and_mode() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = synth(dir.path(), "0.3");
    let grid = dir.path().join("grid.toml");
    std::fs::write(&grid, "learning_rate = [1e-3]\nl2 = [0.0]\n").unwrap();
    let mut args = vec!["ablate-censoring", "--dataset", path(&csv), "--schema", path(&schema), "--losses", "wm", "--grid", path(&grid)];
    args.extend(FAST);
    args.extend(["--k", "3", "--format", "json"]);
    let out = censrank(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = report["rows"].as_array().unwrap();
    let modes: Vec<&str> = rows.iter().map(|r| r["mode"].as_str().unwrap()).collect();
    assert_eq!(modes, ["with_censored", "no_censored", "death_at_censoring"]);
    assert!(rows.iter().all(|r| r["report"]["folds"].as_array().unwrap().len() == 3));
}

#[test]
fn sweep_below_native_fraction_is_an_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = synth(dir.path(), "0.4");
    let mut args = vec!["sweep-censoring", "--dataset", path(&csv), "--schema", path(&schema), "--fractions", "0.1"];
    args.extend(FAST);
    let err = error_line(&censrank(&args));
    assert_eq!(err["error"], "invalid_argument");
    assert!(err["message"].as_str().unwrap().contains("below the native fraction"));
}

#[test]
fn unknown_loss_and_missing_file_are_error_lines() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = synth(dir.path(), "0.3");
    let err = error_line(&censrank(&["cv", "--dataset", path(&csv), "--schema", path(&schema), "--loss", "rank-foo"]));
    assert_eq!(err["error"], "invalid_argument");
    let missing = dir.path().join("nope.csv");
    let err = error_line(&censrank(&["km", "--dataset", path(&missing), "--schema", path(&schema)]));
    assert_eq!(err["error"], "io");
}

#[test]
fn preprocess_writes_encoded_features() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("raw.csv");
    std::fs::write(&csv, "time,event,age,group\n5,1,40,a\n7,0,NA,b\n9,1,60,a\n").unwrap();
    let schema = dir.path().join("raw.toml");
    std::fs::write(&schema, "[columns]\ntime = \"time\"\nevent = \"event_indicator\"\nage = \"continuous\"\ngroup = \"categorical\"\n").unwrap();
    let out = censrank(&["preprocess", "--dataset", path(&csv), "--schema", path(&schema)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    let header = text.lines().next().unwrap();
    assert!(header.contains("time") && header.contains("event"));
}
