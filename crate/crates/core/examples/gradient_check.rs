//! Compare the hand-written encoder gradients with central differences on a
//! small random graph.
//!
//! ```bash
//! cargo run -p gaecoref --example gradient_check
//! ```

use gaecoref::gcn::{encoder_backward, encoder_forward, init_weights, EncoderDims, EncoderOutput, EncoderWeights, OutputGrads};
use gaecoref::graph::normalized_adjacency;
use gaecoref::model::{reconstruction_loss, ReconTarget};
use gaecoref::{CorefGraph, DenseMatrix, FeatureMatrix, Mention, ModelKind};

fn loss(graph_adj: &DenseMatrix, x: &FeatureMatrix, w: &EncoderWeights, target: &ReconTarget) -> f64 {
    match encoder_forward(graph_adj, x, w).unwrap().output {
        EncoderOutput::Gae { z } => reconstruction_loss(&z, target).unwrap().0,
        EncoderOutput::Vgae { .. } => unreachable!("GAE only"),
    }
}

fn main() -> gaecoref::Result<()> {
    let n = 12;
    let mentions: Vec<Mention> = (0..n)
        .map(|id| Mention {
            id,
            doc_id: "d".into(),
            span_text: format!("m{id}"),
            chain_id: format!("c{}", id % 4),
        })
        .collect();
    let graph = CorefGraph::build(mentions)?;
    let adj = normalized_adjacency(&graph, graph.edges())?;
    let target = ReconTarget::new(n, graph.edges())?;
    let x = FeatureMatrix::external(DenseMatrix::from_vec(n, 8, (0..n * 8).map(|k| ((k * 37 % 17) as f64 - 8.0) / 8.0).collect())?);
    let dims = EncoderDims { input: 8, hidden: 6, latent: 4 };
    let w = init_weights(dims, ModelKind::Gae, 1)?;

    let trace = encoder_forward(&adj, &x, &w)?;
    let EncoderOutput::Gae { z } = &trace.output else { unreachable!() };
    let (_, dz) = reconstruction_loss(z, &target)?;
    let grads = encoder_backward(&trace, &adj, &x, &w, &OutputGrads::Gae { dz })?;

    let h = 1e-5;
    for (name, k) in [("W0", 0), ("W1", 1)] {
        let analytic = grads.matrices()[k];
        let mut worst = 0.0f64;
        for idx in 0..analytic.values().len() {
            let bump = |d: f64| {
                let mut w2 = w.clone();
                let m = if k == 0 { &mut w2.w0 } else { &mut w2.w1 };
                m.values_mut()[idx] += d;
                loss(&adj, &x, &w2, &target)
            };
            let numeric = (bump(h) - bump(-h)) / (2.0 * h);
            let a = analytic.values()[idx];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7));
        }
        println!("{name}: max relative error {worst:.2e}");
    }
    Ok(())
}
