//! Event coreference resolution as graph reconstruction.
//!
//! Mentions are nodes of an undirected graph whose edges are coreference
//! links. A share of the links is masked; a graph autoencoder (GAE) or its
//! variational form (VGAE) with a two-layer GCN encoder and an inner-product
//! decoder is trained on the rest and predicts the masked links. Predicted
//! links are merged back into chains and scored with MUC, B³, CEAF-e and
//! CONLL F1.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`graph`]: corpus model, normalized adjacency, edge masking, features
//! - [`gcn`]: encoder forward pass and hand-derived gradients
//! - [`model`]: decoder, losses, Adam, training loop, model files
//! - [`metrics`]: chain reconstruction and coreference / ranking metrics
//! - [`analysis`]: edit-distance difficulty report, cosine baseline, ablations
//! - [`synth`]: synthetic corpora with lexical confounds
//! - [`cli`]: the `gaecoref` command line
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod analysis;
pub mod assignment;
pub mod cli;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
pub use gcn::ModelKind;
pub use graph::{CorefGraph, Edge, EdgeSplit, FeatureKind, FeatureMatrix, Mention};
pub use matrix::{CsrMatrix, DenseMatrix};
pub use metrics::{Clustering, Prf, ScoreReport};
pub use model::{ModelConfig, TrainedModel};
