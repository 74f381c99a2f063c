//! Retrain GAE with and without features on shrinking shares of the edge
//! set and write the CONLL grid as TSV and SVG.
//!
//! ```bash
//! cargo run --release -p gaecoref --example ablation -- [out_dir]
//! ```

use std::path::PathBuf;

use gaecoref::analysis::{run_ablation, AblationVariant};
use gaecoref::graph::split_edges;
use gaecoref::synth::{generate, GenParams};
use gaecoref::{CorefGraph, FeatureMatrix, ModelConfig, ModelKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "ablation".into()));
    std::fs::create_dir_all(&out)?;

    let corpus = generate(&GenParams::default())?;
    let graph = CorefGraph::build(corpus.mentions)?;
    let split = split_edges(&graph, 0.05, 0.10, 0)?;
    let config = ModelConfig::new(ModelKind::Gae, 0);
    let variants = [
        AblationVariant {
            name: "gae-feat".into(),
            features: FeatureMatrix::external(corpus.features),
            config: config.clone(),
        },
        AblationVariant {
            name: "gae-nofeat".into(),
            features: FeatureMatrix::identity(&graph),
            config,
        },
    ];
    let fractions = [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75];
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let result = run_ablation(&graph, &split, &variants, &fractions, &[0], threads)?;

    print!("{}", result.to_tsv());
    std::fs::write(out.join("ablation.tsv"), result.to_tsv())?;
    std::fs::write(out.join("ablation_cells.tsv"), result.to_long_tsv())?;
    std::fs::write(out.join("ablation.svg"), result.to_svg())?;
    println!("wrote {}", out.display());
    Ok(())
}
