//! Mask validation and test edges, sample balanced non-edges, save the split
//! and shrink the training edges the way the low-data ablation does.
//!
//! ```bash
//! cargo run -p gaecoref --example split_and_subsample
//! ```

use gaecoref::graph::{read_split, split_edges, subsample_training, write_split};
use gaecoref::synth::{generate, GenParams};
use gaecoref::CorefGraph;

fn main() -> gaecoref::Result<()> {
    let corpus = generate(&GenParams::default())?;
    let graph = CorefGraph::build(corpus.mentions)?;
    let split = split_edges(&graph, 0.05, 0.10, 0)?;
    println!(
        "|E| = {}: train {} / val {}+{} / test {}+{} (positives+negatives)",
        graph.edges().len(),
        split.train_pos.len(),
        split.val_pos.len(),
        split.val_neg.len(),
        split.test_pos.len(),
        split.test_neg.len()
    );

    let path = std::env::temp_dir().join("gaecoref-split.tsv");
    write_split(&path, &split)?;
    assert_eq!(read_split(&path)?, split);
    println!("round-tripped through {}", path.display());

    for fraction in [0.05, 0.25, 0.75, 1.0] {
        let sub = subsample_training(&split, fraction, 0)?;
        println!("fraction {fraction:.2} of |E| -> {} training edges", sub.train_pos.len());
    }
    Ok(())
}
