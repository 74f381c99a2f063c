//! Generate a synthetic cross-document corpus, write it in the ingestion
//! formats and print a few statistics about chains, surfaces and features.
//!
//! ```bash
//! cargo run --release -p gaecoref --example generate_corpus -- [out_dir]
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use gaecoref::analysis::{cosine, levenshtein};
use gaecoref::synth::{generate, GenParams};
use gaecoref::CorefGraph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic".into()));
    std::fs::create_dir_all(&out)?;

    for (name, params) in [("default", GenParams::default()), ("confound-rich", GenParams::confound_rich())] {
        let corpus = generate(&params)?;
        let corpus_path = out.join(format!("{name}.jsonl"));
        let features_path = out.join(format!("{name}.tsv"));
        corpus.write(&corpus_path, &features_path)?;

        let graph = CorefGraph::build(corpus.mentions.clone())?;
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for chain in graph.gold_clustering().chains() {
            *sizes.entry(chain.len()).or_default() += 1;
        }

        // within- vs between-chain feature similarity and surface distance
        let x = &corpus.features;
        let (mut within, mut between) = ((0.0, 0usize, 0usize), (0.0, 0usize));
        for i in 0..graph.len() {
            for j in i + 1..graph.len() {
                let c = cosine(x.row(i), x.row(j));
                if graph.has_edge(i, j) {
                    within.0 += c;
                    within.1 += 1;
                    within.2 += levenshtein(graph.span(i).unwrap(), graph.span(j).unwrap());
                } else {
                    between.0 += c;
                    between.1 += 1;
                }
            }
        }
        println!("{name}: {} mentions, {} gold edges -> {}", graph.len(), graph.edges().len(), corpus_path.display());
        println!("  chain sizes: {sizes:?}");
        println!(
            "  mean cosine within chains {:.3}, between {:.3}; mean within-chain edit distance {:.2}",
            within.0 / within.1 as f64,
            between.0 / between.1 as f64,
            within.2 as f64 / within.1 as f64
        );
        println!("  chains sharing another chain's lemma: {}", corpus.confounded_from.iter().flatten().count());
        println!("  e.g. {:?}", corpus.mentions[0]);
    }
    Ok(())
}
