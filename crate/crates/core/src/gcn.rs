//! Two-layer GCN encoder with hand-written backpropagation.
//!
//! Forward:
//!
//! ```text
//! H_pre = Ã X W0
//! H1    = ReLU(H_pre)            (optionally dropped out)
//! AH    = Ã H1
//! Z     = AH W1                  (GAE)
//! μ     = AH Wμ,  logσ = AH Wσ   (VGAE, shared first layer)
//! ```
//!
//! Ã is symmetric, so every transposed propagation in the backward pass is a
//! plain propagation.

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureKind, FeatureMatrix};
use crate::matrix::{DenseMatrix, Propagate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gae,
    Vgae,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Gae => "gae",
            ModelKind::Vgae => "vgae",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gae" => Ok(ModelKind::Gae),
            "vgae" => Ok(ModelKind::Vgae),
            other => Err(Error::invalid(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderDims {
    pub input: usize,
    pub hidden: usize,
    pub latent: usize,
}

/// Encoder parameters. For VGAE, `w1` is the mean head and `w_logsig` the
/// log-standard-deviation head; both read the shared first layer.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderWeights {
    pub w0: DenseMatrix,
    pub w1: DenseMatrix,
    pub w_logsig: Option<DenseMatrix>,
}

impl EncoderWeights {
    pub fn kind(&self) -> ModelKind {
        if self.w_logsig.is_some() {
            ModelKind::Vgae
        } else {
            ModelKind::Gae
        }
    }

    pub fn dims(&self) -> EncoderDims {
        EncoderDims {
            input: self.w0.rows(),
            hidden: self.w0.cols(),
            latent: self.w1.cols(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        let count = |m: &DenseMatrix| m.rows() * m.cols();
        count(&self.w0) + count(&self.w1) + self.w_logsig.as_ref().map_or(0, count)
    }

    pub(crate) fn matrices_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out = vec![&mut self.w0, &mut self.w1];
        if let Some(ls) = self.w_logsig.as_mut() {
            out.push(ls);
        }
        out
    }
}

/// Glorot-uniform initialization, `U(±√(6 / (fan_in + fan_out)))`.
///
/// Matrices are drawn in the order W0, W1 (or Wμ), Wσ from one seeded
/// stream, so a GAE and a VGAE with the same seed and dims share W0 and
/// W1 = Wμ.
pub fn init_weights(dims: EncoderDims, kind: ModelKind, seed: u64) -> Result<EncoderWeights> {
    if dims.input == 0 || dims.hidden == 0 || dims.latent == 0 {
        return Err(Error::invalid(format!("encoder dims must be positive: {dims:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w0 = glorot(dims.input, dims.hidden, &mut rng);
    let w1 = glorot(dims.hidden, dims.latent, &mut rng);
    let w_logsig = match kind {
        ModelKind::Gae => None,
        ModelKind::Vgae => Some(glorot(dims.hidden, dims.latent, &mut rng)),
    };
    Ok(EncoderWeights { w0, w1, w_logsig })
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> DenseMatrix {
    let bound = glorot_bound(fan_in, fan_out);
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let values = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
    DenseMatrix::from_vec(fan_in, fan_out, values).expect("shape and values are valid")
}

#[derive(Clone, Debug, PartialEq)]
pub enum EncoderOutput {
    Gae { z: DenseMatrix },
    Vgae { mu: DenseMatrix, logsig: DenseMatrix },
}

impl EncoderOutput {
    /// Latents used for deterministic decoding: Z for GAE, μ for VGAE.
    pub fn embedding(&self) -> &DenseMatrix {
        match self {
            EncoderOutput::Gae { z } => z,
            EncoderOutput::Vgae { mu, .. } => mu,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub h_pre: DenseMatrix,
    pub h1: DenseMatrix,
    /// Inverted-dropout scale per hidden unit (0 or 1/(1-p)), when active.
    pub dropout_mask: Option<DenseMatrix>,
    /// Ã · (dropped-out) H1, the input to the output heads.
    pub ah: DenseMatrix,
    pub output: EncoderOutput,
}

/// Gradients of the loss with respect to the encoder outputs.
#[derive(Clone, Debug)]
pub enum OutputGrads {
    Gae { dz: DenseMatrix },
    Vgae { dmu: DenseMatrix, dlogsig: DenseMatrix },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightGrads {
    pub w0: DenseMatrix,
    pub w1: DenseMatrix,
    pub w_logsig: Option<DenseMatrix>,
}

impl WeightGrads {
    pub fn matrices(&self) -> Vec<&DenseMatrix> {
        let mut out = vec![&self.w0, &self.w1];
        if let Some(ls) = &self.w_logsig {
            out.push(ls);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().iter().all(|m| m.is_finite())
    }
}

fn features_times(x: &FeatureMatrix, w0: &DenseMatrix) -> Result<DenseMatrix> {
    match x.kind {
        // X = I: X·W0 = W0
        FeatureKind::Identity => {
            if x.data.rows() != w0.rows() {
                return Err(Error::shape(
                    "encoder_forward",
                    format!("identity features of order {} vs W0 {:?}", x.data.rows(), w0.shape()),
                ));
            }
            Ok(w0.clone())
        }
        FeatureKind::External => x.data.matmul(w0),
    }
}

/// Deterministic forward pass (no dropout).
pub fn encoder_forward(
    adj: &impl Propagate,
    x: &FeatureMatrix,
    weights: &EncoderWeights,
) -> Result<ForwardTrace> {
    forward_impl(adj, x, weights, None)
}

/// Training-mode forward pass with inverted dropout on the hidden layer.
pub fn encoder_forward_train(
    adj: &impl Propagate,
    x: &FeatureMatrix,
    weights: &EncoderWeights,
    dropout: f64,
    rng: &mut impl Rng,
) -> Result<ForwardTrace> {
    if dropout <= 0.0 {
        return forward_impl(adj, x, weights, None);
    }
    if dropout >= 1.0 {
        return Err(Error::invalid(format!("dropout must be < 1, got {dropout}")));
    }
    let (n, h) = (x.data.rows(), weights.w0.cols());
    let keep = 1.0 / (1.0 - dropout);
    let values = (0..n * h)
        .map(|_| if rng.random::<f64>() < dropout { 0.0 } else { keep })
        .collect();
    let mask = DenseMatrix::from_vec(n, h, values)?;
    forward_impl(adj, x, weights, Some(mask))
}

fn forward_impl(
    adj: &impl Propagate,
    x: &FeatureMatrix,
    weights: &EncoderWeights,
    dropout_mask: Option<DenseMatrix>,
) -> Result<ForwardTrace> {
    let n = adj.order();
    if x.data.rows() != n {
        return Err(Error::shape(
            "encoder_forward",
            format!("adjacency order {n} vs {} feature rows", x.data.rows()),
        ));
    }
    if x.data.cols() != weights.w0.rows() {
        return Err(Error::shape(
            "encoder_forward",
            format!("features {:?} vs W0 {:?}", x.data.shape(), weights.w0.shape()),
        ));
    }
    if weights.w1.rows() != weights.w0.cols()
        || weights
            .w_logsig
            .as_ref()
            .is_some_and(|ls| ls.shape() != weights.w1.shape())
    {
        return Err(Error::shape("encoder_forward", "inconsistent head shapes"));
    }

    let h_pre = adj.propagate(&features_times(x, &weights.w0)?)?;
    let h1 = h_pre.map(|v| v.max(0.0));
    let ah = match &dropout_mask {
        Some(mask) => adj.propagate(&h1.zip_map(mask, |a, b| a * b)?)?,
        None => adj.propagate(&h1)?,
    };
    let output = match &weights.w_logsig {
        None => EncoderOutput::Gae {
            z: ah.matmul(&weights.w1)?,
        },
        Some(ls) => EncoderOutput::Vgae {
            mu: ah.matmul(&weights.w1)?,
            logsig: ah.matmul(ls)?,
        },
    };
    Ok(ForwardTrace {
        h_pre,
        h1,
        dropout_mask,
        ah,
        output,
    })
}

/// Exact gradients of the loss with respect to every weight matrix, given
/// the loss gradient at the encoder outputs. ReLU'(0) is taken as 0.
pub fn encoder_backward(
    trace: &ForwardTrace,
    adj: &impl Propagate,
    x: &FeatureMatrix,
    weights: &EncoderWeights,
    grads: &OutputGrads,
) -> Result<WeightGrads> {
    let (dw1, dw_logsig, d_ah) = match (grads, &weights.w_logsig) {
        (OutputGrads::Gae { dz }, None) => {
            let dw1 = trace.ah.t_matmul(dz)?;
            let d_ah = dz.matmul_t(&weights.w1)?;
            (dw1, None, d_ah)
        }
        (OutputGrads::Vgae { dmu, dlogsig }, Some(w_ls)) => {
            let dw1 = trace.ah.t_matmul(dmu)?;
            let dls = trace.ah.t_matmul(dlogsig)?;
            let d_ah = dmu.matmul_t(&weights.w1)?.add(&dlogsig.matmul_t(w_ls)?)?;
            (dw1, Some(dls), d_ah)
        }
        _ => {
            return Err(Error::invalid(
                "output gradients do not match the model kind of the weights",
            ))
        }
    };

    let mut d_h1 = adj.propagate(&d_ah)?;
    if let Some(mask) = &trace.dropout_mask {
        d_h1 = d_h1.zip_map(mask, |g, m| g * m)?;
    }
    let d_hpre = d_h1.zip_map(&trace.h_pre, |g, pre| if pre > 0.0 { g } else { 0.0 })?;
    let a_dhpre = adj.propagate(&d_hpre)?;
    let dw0 = match x.kind {
        FeatureKind::Identity => a_dhpre,
        FeatureKind::External => x.data.t_matmul(&a_dhpre)?,
    };
    Ok(WeightGrads {
        w0: dw0,
        w1: dw1,
        w_logsig: dw_logsig,
    })
}
