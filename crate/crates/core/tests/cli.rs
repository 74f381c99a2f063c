use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gaecoref(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaecoref"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("GAECOREF_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = gaecoref(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A 90-mention corpus generated into `gen/`.
fn small_corpus(dir: &Path) {
    ok(
        dir,
        &["generate", "--mentions", "90", "--chains", "12", "--docs", "9", "--dim", "16", "--seed", "4", "--out", "gen"],
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_corpus(dir);
    for f in ["corpus.jsonl", "features.tsv", "config.txt", "run_meta.json", "run.log"] {
        assert!(dir.join("gen").join(f).is_file(), "gen/{f}");
    }
    ok(dir, &["split", "--corpus", "gen/corpus.jsonl", "--seed", "2", "--out", "split"]);
    assert!(dir.join("split/split.tsv").is_file());

    ok(
        dir,
        &[
            "train", "--corpus", "gen/corpus.jsonl", "--features", "gen/features.tsv", "--split", "split/split.tsv",
            "--model", "vgae", "--seed", "7", "--epochs", "20", "--out", "run",
        ],
    );
    for f in ["model.json", "history.tsv", "split.tsv", "config.txt", "run_meta.json"] {
        assert!(dir.join("run").join(f).is_file(), "run/{f}");
    }
    let history = fs::read_to_string(dir.join("run/history.tsv")).unwrap();
    assert_eq!(history.lines().count(), 21);
    let meta = read_json(&dir.join("run/run_meta.json"));
    assert_eq!(meta["command"], "train");
    assert_eq!(meta["settings"]["seed"], 7);
    assert_eq!(meta["settings"]["model"], "vgae");

    ok(
        dir,
        &["eval", "--corpus", "gen/corpus.jsonl", "--split", "run/split.tsv", "--model", "run/model.json", "--out", "ev"],
    );
    let scores = read_json(&dir.join("ev/scores.json"));
    for key in ["conll", "muc", "b3", "ceaf_e", "ap", "auc", "threshold"] {
        assert!(!scores[key].is_null(), "scores.json lacks {key}");
    }
    assert!(dir.join("ev/chains.jsonl").is_file());

    ok(
        dir,
        &[
            "ablate", "--corpus", "gen/corpus.jsonl", "--features", "gen/features.tsv", "--fractions", "0.25,0.05",
            "--epochs", "10", "--threads", "2", "--out", "ab",
        ],
    );
    let table = fs::read_to_string(dir.join("ab/ablation.tsv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("model\t5\t25"));
    assert!(lines.next().unwrap().starts_with("gae-feat\t"));
    assert!(lines.next().unwrap().starts_with("gae-nofeat\t"));
    assert!(fs::read_to_string(dir.join("ab/ablation.svg")).unwrap().starts_with("<svg"));

    ok(
        dir,
        &[
            "analyze", "--corpus", "gen/corpus.jsonl", "--features", "gen/features.tsv", "--epochs", "10",
            "--model", "mine=run/model.json", "--out", "an",
        ],
    );
    let report = fs::read_to_string(dir.join("an/tp_levenshtein.tsv")).unwrap();
    assert!(report.starts_with("model\tlevenshtein_tp\ttp_count\n"));
    assert!(report.contains("\nmine\t") && report.contains("\ncosine\t"));
}

#[test]
fn eval_of_gold_chains_scores_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_corpus(dir);
    // gold chains from the corpus itself
    let corpus = fs::read_to_string(dir.join("gen/corpus.jsonl")).unwrap();
    let mut chains: std::collections::BTreeMap<String, Vec<u64>> = Default::default();
    for line in corpus.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        chains
            .entry(v["chain_id"].as_str().unwrap().to_string())
            .or_default()
            .push(v["id"].as_u64().unwrap());
    }
    let text: String = chains
        .values()
        .map(|c| format!("{}\n", serde_json::json!({ "chain": c })))
        .collect();
    fs::write(dir.join("gold.jsonl"), text).unwrap();
    ok(dir, &["eval", "--corpus", "gen/corpus.jsonl", "--chains", "gold.jsonl", "--out", "ev"]);
    let scores = read_json(&dir.join("ev/scores.json"));
    assert_eq!(scores["conll"], 1.0);
}

#[test]
fn reruns_overwrite_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_corpus(dir);
    let args = ["train", "--corpus", "gen/corpus.jsonl", "--epochs", "15", "--seed", "3", "--out", "r"];
    ok(dir, &args);
    let first: Vec<Vec<u8>> = ["model.json", "history.tsv", "split.tsv", "run_meta.json", "config.txt"]
        .iter()
        .map(|f| fs::read(dir.join("r").join(f)).unwrap())
        .collect();
    ok(dir, &args);
    for (k, f) in ["model.json", "history.tsv", "split.tsv", "run_meta.json", "config.txt"].iter().enumerate() {
        assert_eq!(fs::read(dir.join("r").join(f)).unwrap(), first[k], "{f} changed");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_corpus(dir);
    fs::write(dir.join("c.txt"), "# settings\ncorpus = gen/corpus.jsonl\nepochs = 3\nhidden = 8\n").unwrap();
    ok(dir, &["train", "--config", "c.txt", "--epochs", "5", "--out", "r"]);
    let meta = read_json(&dir.join("r/run_meta.json"));
    assert_eq!(meta["settings"]["epochs"], 5);
    assert_eq!(meta["settings"]["hidden"], 8);

    // the snapshot replays the same run
    ok(dir, &["train", "--config", "r/config.txt", "--out", "r2"]);
    assert_eq!(
        fs::read(dir.join("r/model.json")).unwrap(),
        fs::read(dir.join("r2/model.json")).unwrap()
    );
}

#[test]
fn default_run_directory_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = Command::new(env!("CARGO_BIN_EXE_gaecoref"))
        .current_dir(dir)
        .env("GAECOREF_OUT", "root")
        .args(["generate", "--mentions", "30", "--chains", "5", "--docs", "3", "--dim", "4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.join("root/generate/corpus.jsonl").is_file());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_corpus(dir);

    let unknown = gaecoref(dir, &["train", "--corpus", "gen/corpus.jsonl", "--no-such-flag"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr(&unknown).starts_with("error:"));
    assert_eq!(gaecoref(dir, &["eval", "--corpus", "gen/corpus.jsonl"]).status.code(), Some(1));
    assert_eq!(gaecoref(dir, &["frobnicate"]).status.code(), Some(1));

    let missing = gaecoref(dir, &["train", "--corpus", "nope.jsonl", "--out", "x"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).starts_with("error:"));
    assert!(!dir.join("x").exists());

    fs::write(dir.join("bad.jsonl"), "{\"id\": 0}\n").unwrap();
    let bad = gaecoref(dir, &["split", "--corpus", "bad.jsonl", "--out", "y"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("error:"));

    let invalid = gaecoref(dir, &["train", "--corpus", "gen/corpus.jsonl", "--threshold", "2", "--out", "z"]);
    assert_eq!(invalid.status.code(), Some(2));

    let diverged = gaecoref(dir, &["train", "--corpus", "gen/corpus.jsonl", "--lr", "1e300", "--epochs", "10", "--out", "d"]);
    assert_eq!(diverged.status.code(), Some(3));
    assert!(stderr(&diverged).contains("error: training diverged"));
}

#[test]
fn every_command_has_help() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["generate", "split", "train", "eval", "ablate", "analyze"] {
        let out = gaecoref(tmp.path(), &[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--out") && text.contains("--config"), "{cmd}");
    }
}
