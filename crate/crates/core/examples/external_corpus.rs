//! Load a corpus and features produced outside this crate: the JSONL may
//! carry extra fields (offsets, context) and the TSV holds one row of
//! precomputed embeddings per mention id. Trains on them and scores chains.
//!
//! ```bash
//! cargo run --release -p gaecoref --example external_corpus -- corpus.jsonl features.tsv
//! ```
//! Without arguments a small corpus is written to a temp directory first.

use std::fmt::Write as _;
use std::path::PathBuf;

use gaecoref::analysis::train_and_evaluate;
use gaecoref::graph::{load_features, read_corpus, split_edges};
use gaecoref::synth::{generate, GenParams};
use gaecoref::{CorefGraph, ModelConfig, ModelKind};

fn write_demo_files() -> Result<(PathBuf, PathBuf), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("gaecoref-external");
    std::fs::create_dir_all(&dir)?;
    let corpus = generate(&GenParams { n_mentions: Some(150), n_chains: 20, n_docs: 15, ..GenParams::default() })?;
    let mut jsonl = String::new();
    for m in &corpus.mentions {
        // the extra fields an embedding exporter keeps alongside each mention
        let line = serde_json::json!({
            "id": m.id, "doc_id": m.doc_id, "span_text": m.span_text, "chain_id": m.chain_id,
            "sentence": format!("... {} ...", m.span_text), "char_start": 4, "char_end": 4 + m.span_text.len(),
        });
        writeln!(jsonl, "{line}")?;
    }
    let mut tsv = String::new();
    for id in 0..corpus.mentions.len() {
        let row: Vec<String> = corpus.features.row(id).iter().map(|v| v.to_string()).collect();
        writeln!(tsv, "{id}\t{}", row.join("\t"))?;
    }
    let (c, f) = (dir.join("corpus.jsonl"), dir.join("features.tsv"));
    std::fs::write(&c, jsonl)?;
    std::fs::write(&f, tsv)?;
    Ok((c, f))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (corpus_path, features_path) = match args.as_slice() {
        [c, f] => (PathBuf::from(c), PathBuf::from(f)),
        _ => write_demo_files()?,
    };
    let graph = CorefGraph::build(read_corpus(&corpus_path)?)?;
    let features = load_features(&features_path, &graph)?;
    println!("{} mentions, {}-d features from {}", graph.len(), features.dim(), features_path.display());

    let split = split_edges(&graph, 0.05, 0.10, 0)?;
    let (model, eval) = train_and_evaluate(&graph, &split, &features, &ModelConfig::new(ModelKind::Gae, 0), true)?;
    println!("threshold {:.2}\n{}", model.decision_threshold, eval.report);
    Ok(())
}
