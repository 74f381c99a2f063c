//! Train a VGAE, follow its reconstruction and KL terms, and compare it with
//! a GAE when the posterior noise is pinned near zero.
//!
//! ```bash
//! cargo run --release -p gaecoref --example vgae
//! ```

use gaecoref::graph::split_edges;
use gaecoref::model::train;
use gaecoref::synth::{generate, GenParams};
use gaecoref::{CorefGraph, FeatureMatrix, ModelConfig, ModelKind};

fn main() -> gaecoref::Result<()> {
    let corpus = generate(&GenParams::default())?;
    let graph = CorefGraph::build(corpus.mentions)?;
    let split = split_edges(&graph, 0.05, 0.10, 0)?;
    let x = FeatureMatrix::external(corpus.features);

    let vgae = train(&graph, &split, &x, &ModelConfig::new(ModelKind::Vgae, 0))?;
    let gae = train(&graph, &split, &x, &ModelConfig::new(ModelKind::Gae, 0))?;
    let pinned = train(
        &graph,
        &split,
        &x,
        &ModelConfig {
            fixed_log_sigma: Some(-10.0),
            ..ModelConfig::new(ModelKind::Vgae, 0)
        },
    )?;

    println!("{:>5} {:>10} {:>10} {:>9} {:>12} {:>12}", "epoch", "vgae recon", "vgae kl", "val AP", "gae recon", "pinned recon");
    for e in [1, 10, 25, 50, 100, 150, 200] {
        let (v, g, p) = (&vgae.history[e - 1], &gae.history[e - 1], &pinned.history[e - 1]);
        println!(
            "{e:>5} {:>10.5} {:>10.4} {:>9.4} {:>12.5} {:>12.5}",
            v.recon,
            v.kl,
            v.val_ap.unwrap_or(f64::NAN),
            g.recon,
            p.recon
        );
    }
    let logsig = vgae.weights.w_logsig.as_ref().expect("vgae has a log-sigma head");
    println!("log-sigma head: {}x{}, max |w| {:.3}", logsig.rows(), logsig.cols(), logsig.max_abs());
    Ok(())
}
