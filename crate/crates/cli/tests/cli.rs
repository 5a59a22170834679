use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn emomine(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emomine"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = emomine(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = emomine(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(!err.trim().is_empty());
    err
}

const SPEC: &str = r#"
name = "toy"
n_docs = 200
label_names = ["joy", "anger", "fear"]
lexicons = [["sun", "smile", "laugh"], ["rage", "shout", "fury"], ["dark", "scream", "panic"]]
noise_vocabulary = ["the", "day", "cat", "dog", "road", "tree"]
doc_len = [3, 7]
noise_rate = 0.5
labelset_weights = [
    { labels = [0], weight = 3.0 },
    { labels = [1], weight = 2.0 },
    { labels = [2], weight = 1.0 },
    { labels = [0, 1], weight = 0.5 },
]
"#;

const CONFIG: &str = r#"
seed = 1
k = 3
experiments = ["NB-BOW", "RankSVM-LP-WE"]

[[datasets]]
name = "toy"
path = "data/toy.jsonl"
labels_path = "data/toy.labels.txt"

[embeddings]
path = "data/toy.vectors.txt"
dim = 8

[vocabulary]
min_df = 1

[ranksvm]
epochs = 5
"#;

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("spec.toml"), SPEC).unwrap();
    fs::write(dir.path().join("cfg.toml"), CONFIG).unwrap();
    ok(
        dir.path(),
        &[
            "synth",
            "spec.toml",
            "--seed",
            "3",
            "--out",
            "data",
            "--embedding-dim",
            "8",
        ],
    );
    dir
}

#[test]
fn synth_writes_dataset_labels_and_vectors() {
    let dir = workspace();
    let data = fs::read_to_string(dir.path().join("data/toy.jsonl")).unwrap();
    assert_eq!(data.lines().count(), 200);
    assert_eq!(
        fs::read_to_string(dir.path().join("data/toy.labels.txt")).unwrap(),
        "joy\nanger\nfear\n"
    );
    let vectors = fs::read_to_string(dir.path().join("data/toy.vectors.txt")).unwrap();
    assert!(vectors.lines().all(|l| l.split_whitespace().count() == 9));

    // same seed, same corpus
    ok(
        dir.path(),
        &["synth", "spec.toml", "--seed", "3", "--out", "again"],
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("again/toy.jsonl")).unwrap(),
        data
    );
}

#[test]
fn folds_and_imbalance() {
    let dir = workspace();
    let plan: serde_json::Value =
        serde_json::from_str(&ok(dir.path(), &["folds", "--config", "cfg.toml"])).unwrap();
    assert_eq!(plan["k"], 3);
    assert_eq!(plan["document_ids"].as_array().unwrap().len(), 200);

    let other: serde_json::Value = serde_json::from_str(&ok(
        dir.path(),
        &["folds", "--config", "cfg.toml", "--seed", "9"],
    ))
    .unwrap();
    assert_eq!(other["seed"], 9);
    assert_ne!(other["assignments"], plan["assignments"]);

    let summary: serde_json::Value =
        serde_json::from_str(&ok(dir.path(), &["imbalance", "--config", "cfg.toml"])).unwrap();
    assert_eq!(summary["n_documents"], 200);
    assert!(summary["labelset_imbalance"]["value"].is_number());

    ok(
        dir.path(),
        &[
            "imbalance",
            "--config",
            "cfg.toml",
            "--format",
            "csv",
            "--out",
            "stats",
        ],
    );
    let csv = fs::read_to_string(dir.path().join("stats/labelsets_toy.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("labelset,count"));
    let total: usize = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 200);
}

#[test]
fn train_then_eval() {
    let dir = workspace();
    let printed = ok(
        dir.path(),
        &[
            "train",
            "--config",
            "cfg.toml",
            "--dataset",
            "toy",
            "--experiment",
            "RankSVM-LP-WE",
            "--fold",
            "2",
            "--out",
            "ck",
        ],
    );
    let path = "ck/checkpoint_toy_RankSVM-LP-WE_fold2.json";
    assert_eq!(printed.trim(), Path::new(path).display().to_string());

    let eval: serde_json::Value = serde_json::from_str(&ok(
        dir.path(),
        &["eval", "--config", "cfg.toml", "--checkpoint", path],
    ))
    .unwrap();
    assert_eq!(eval["fold"], 2);
    assert!(eval["documents"].as_u64().unwrap() < 200);
    assert!(eval["result"]["micro_fm"].as_f64().unwrap() > 0.8);

    let all: serde_json::Value = serde_json::from_str(&ok(
        dir.path(),
        &[
            "eval",
            "--config",
            "cfg.toml",
            "--checkpoint",
            path,
            "--all",
        ],
    ))
    .unwrap();
    assert_eq!(all["documents"], 200);
}

#[test]
fn report_writes_requested_formats() {
    let dir = workspace();
    ok(
        dir.path(),
        &[
            "report", "--config", "cfg.toml", "--out", "res", "--format", "json,csv",
        ],
    );
    for f in [
        "report.json",
        "results.csv",
        "folds.csv",
        "labelsets_toy.csv",
        "confusion_toy_NB-BOW.csv",
    ] {
        assert!(dir.path().join("res").join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("res/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 2);

    ok(
        dir.path(),
        &[
            "report", "--config", "cfg.toml", "--out", "csv_only", "--format", "csv",
        ],
    );
    assert!(!dir.path().join("csv_only/report.json").exists());
    assert!(dir.path().join("csv_only/results.csv").exists());
}

#[test]
fn ingest_cleans_raw_tweets() {
    let dir = tempfile::tempdir().unwrap();
    let raw = [
        r##"{"text": "Loving this #sunshine today #happy", "labels": ["joy"]}"##,
        r##"{"text": "@bob that was so rude #angry", "labels": ["anger"]}"##,
        r##"{"text": "@bob that was so rude #angry", "labels": ["anger"]}"##,
        r##"{"text": "and then the...", "labels": ["joy"]}"##,
        r##"{"text": "#happy", "labels": ["joy"]}"##,
    ];
    fs::write(dir.path().join("raw.jsonl"), raw.join("\n")).unwrap();
    ok(
        dir.path(),
        &["ingest", "raw.jsonl", "--name", "tweets", "--out", "clean"],
    );
    let clean = fs::read_to_string(dir.path().join("clean/tweets.jsonl")).unwrap();
    assert_eq!(clean.lines().count(), 2);
    for line in clean.lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        let tokens: Vec<&str> = record["tokens"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t.as_str().unwrap())
            .collect();
        assert!(!tokens.is_empty());
        assert!(!tokens
            .iter()
            .any(|t| *t == "happy" || *t == "angry" || *t == "@bob"));
    }
    assert!(clean.contains("\"sunshine\""));
    assert!(clean.contains("\"@user\""));
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let dir = workspace();
    let err = fails(dir.path(), &["report", "--config", "missing.toml"]);
    assert!(err.contains("missing.toml"));
    fails(
        dir.path(),
        &[
            "train",
            "--config",
            "cfg.toml",
            "--dataset",
            "nope",
            "--experiment",
            "NB-BOW",
        ],
    );
    fails(
        dir.path(),
        &[
            "train",
            "--config",
            "cfg.toml",
            "--dataset",
            "toy",
            "--experiment",
            "SVM-BOW",
        ],
    );
    fails(
        dir.path(),
        &[
            "train",
            "--config",
            "cfg.toml",
            "--dataset",
            "toy",
            "--experiment",
            "NB-BOW",
            "--fold",
            "3",
        ],
    );
    fails(
        dir.path(),
        &["folds", "--config", "cfg.toml", "--format", "csv"],
    );
    fails(dir.path(), &["ingest", "absent.jsonl"]);

    fs::write(dir.path().join("bad.toml"), "k = 1\n[[datasets]]\nname = \"toy\"\npath = \"data/toy.jsonl\"\nlabels_path = \"data/toy.labels.txt\"\n").unwrap();
    let err = fails(dir.path(), &["report", "--config", "bad.toml"]);
    assert!(err.contains("invalid configuration"));
    assert!(!dir.path().join("results").exists());
}
