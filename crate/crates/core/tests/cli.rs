use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn rpn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpn")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = rpn(args);
    assert!(
        out.status.success(),
        "rpn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn built_topology_validates() {
    let dir = TempDir::new().unwrap();
    let topo = path(&dir, "t.json");
    ok(&["build", "--features", "10", "--extra-recurrent", "-o", &topo]);
    ok(&["validate", "--topology", &topo]);
}

#[test]
fn shipped_topology_passes_gradient_check() {
    let topo = data("demo_topology.json");
    let corpus = data("fixture_corpus.jsonl");
    let out = ok(&[
        "gradcheck",
        "--topology",
        topo.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--tolerance",
        "1e-4",
    ]);
    let report = json(&out);
    assert!(report["max_relative_error"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn noiseless_top_hypothesis_scores_perfectly() {
    let dir = TempDir::new().unwrap();
    let (corpus, beliefs) = (path(&dir, "c.jsonl"), path(&dir, "b.jsonl"));
    ok(&["gen", "--seed", "3", "--dialogues", "20", "-o", &corpus]);
    ok(&["track", "--top-hypothesis", "--corpus", &corpus, "-o", &beliefs]);
    let report = json(&ok(&["eval", "--corpus", &corpus, "--beliefs", &beliefs]));
    assert_eq!(report["accuracy"].as_f64(), Some(1.0));
    assert_eq!(report["l2"].as_f64(), Some(0.0));
}

#[test]
fn library_errors_exit_1_with_a_kind_prefix() {
    let out = rpn(&["build", "--features", "7"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[model]"));

    let out = rpn(&["validate", "--topology", "/nonexistent/t.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[io]") && err.contains("/nonexistent/t.json"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(rpn(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(rpn(&["validate"]).status.code(), Some(2));
    assert_eq!(rpn(&[]).status.code(), Some(2));
    // exactly one model for track and one weight source for init
    let corpus = data("fixture_corpus.jsonl");
    let corpus = corpus.to_str().unwrap();
    assert_eq!(rpn(&["track", "--corpus", corpus]).status.code(), Some(2));
    assert_eq!(rpn(&["track", "--corpus", corpus, "--top-hypothesis", "--cmbp", "r"]).status.code(), Some(2));
    let topo = data("demo_topology.json");
    let topo = topo.to_str().unwrap();
    assert_eq!(rpn(&["init", "--topology", topo, "--seed", "1"]).status.code(), Some(2));
    assert_eq!(rpn(&["init", "--topology", topo, "--sigma", "0.1", "--coefficients", "r"]).status.code(), Some(2));
    assert_eq!(rpn(&["--help"]).status.code(), Some(0));
}

#[test]
fn out_of_range_confidence_is_reported_with_the_file() {
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.jsonl");
    let text = std::fs::read_to_string(data("fixture_corpus.jsonl"))
        .unwrap()
        .replacen("\"score\":0.9235", "\"score\":1.4", 1);
    std::fs::write(&bad, text).unwrap();
    let out = rpn(&["validate", "--corpus", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[parse]") && err.contains("confidence out of range"), "{err}");
}

#[test]
fn pipeline_from_generation_to_evaluation() {
    let dir = TempDir::new().unwrap();
    let p = |n| path(&dir, n);
    let (corpus, topo, init, trained, beliefs) =
        (p("c.jsonl"), p("t.json"), p("i.json"), p("w.json"), p("b.jsonl"));
    ok(&["gen", "--seed", "5", "--dialogues", "50", "--confusion", "0.2", "-o", &corpus]);
    ok(&["build", "-o", &topo]);
    let rule = data("demo_rule.cmbp");
    ok(&["init", "--topology", &topo, "--coefficients", rule.to_str().unwrap(), "-o", &init]);
    let summary = json(&ok(&[
        "train", "--topology", &init, "--corpus", &corpus, "--batch-size", "8", "--epochs", "10",
        "-o", &trained,
    ]));
    assert!(summary["val_accuracy"].as_f64().unwrap() >= summary["initial_accuracy"].as_f64().unwrap());
    ok(&["validate", "--topology", &trained]);
    ok(&["track", "--topology", &trained, "--corpus", &corpus, "-o", &beliefs]);
    let report = json(&ok(&["eval", "--corpus", &corpus, "--beliefs", &beliefs]));
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(report["turns_scored"].as_u64().unwrap() > 0);
}

#[test]
fn rule_tracking_agrees_with_the_initialised_network() {
    let corpus = data("fixture_corpus.jsonl");
    let corpus = corpus.to_str().unwrap();
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.jsonl"), path(&dir, "b.jsonl"));
    ok(&["track", "--cmbp", data("demo_rule.cmbp").to_str().unwrap(), "--corpus", corpus, "-o", &a]);
    ok(&["track", "--topology", data("demo_topology.json").to_str().unwrap(), "--corpus", corpus, "-o", &b]);
    let ra = json(&ok(&["eval", "--corpus", corpus, "--beliefs", &a]));
    let rb = json(&ok(&["eval", "--corpus", corpus, "--beliefs", &b]));
    assert_eq!(ra["accuracy"], rb["accuracy"]);
}
