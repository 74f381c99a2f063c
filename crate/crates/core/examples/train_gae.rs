//! Train GAE and VGAE on a synthetic corpus, with and without node features,
//! and score the reconstructed chains.
//!
//! ```bash
//! cargo run --release -p gaecoref --example train_gae -- [seed]
//! ```

use std::time::Instant;

use gaecoref::analysis::train_and_evaluate;
use gaecoref::graph::split_edges;
use gaecoref::synth::{generate, GenParams};
use gaecoref::{CorefGraph, FeatureMatrix, ModelConfig, ModelKind};

fn main() -> gaecoref::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let corpus = generate(&GenParams::default().with_seed(seed))?;
    let graph = CorefGraph::build(corpus.mentions)?;
    let split = split_edges(&graph, 0.05, 0.10, seed)?;
    println!(
        "{} mentions, {} edges ({} train / {} val / {} test)",
        graph.len(),
        graph.edges().len(),
        split.train_pos.len(),
        split.val_pos.len(),
        split.test_pos.len()
    );

    let with_features = FeatureMatrix::external(corpus.features);
    let featureless = FeatureMatrix::identity(&graph);
    for kind in [ModelKind::Gae, ModelKind::Vgae] {
        for (name, features) in [("features", &with_features), ("featureless", &featureless)] {
            let start = Instant::now();
            let config = ModelConfig::new(kind, seed);
            let (model, eval) = train_and_evaluate(&graph, &split, features, &config, true)?;
            let last = model.history.last().expect("non-empty history");
            println!(
                "{kind:<4} {name:<11} loss {:.4}  val AP {:.4}  test AP {:.4}  AUC {:.4}  τ {:.2}  CONLL {:.4}  ({} params, {:.2?})",
                last.loss,
                last.val_ap.unwrap_or(f64::NAN),
                eval.report.ap.unwrap_or(f64::NAN),
                eval.report.auc.unwrap_or(f64::NAN),
                model.decision_threshold,
                eval.report.conll,
                model.weights.parameter_count(),
                start.elapsed()
            );
        }
    }
    Ok(())
}
