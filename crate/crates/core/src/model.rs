//! GAE / VGAE assembly: inner-product decoder, weighted reconstruction loss,
//! KL regularizer, reparameterization, Adam and the full-graph training loop.
//!
//! The reconstruction loss is taken over all N² cells of `A_train + I`, so
//! masked val/test pairs act as presumed negatives during training. This is
//! the standard setup for the protocol and a known source of mild leakage.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{
    encoder_backward, encoder_forward, encoder_forward_train, init_weights, EncoderDims, EncoderOutput,
    EncoderWeights, ModelKind, OutputGrads,
};
use crate::graph::{normalized_adjacency_sparse, CorefGraph, Edge, EdgeSplit, FeatureKind, FeatureMatrix};
use crate::matrix::{dot, DenseMatrix};
use crate::metrics::{average_precision, roc_auc, tune_threshold_on_val};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `σ(zᵢ · zⱼ)`
pub fn decode_pair(z: &DenseMatrix, i: usize, j: usize) -> f64 {
    sigmoid(dot(z.row(i), z.row(j)))
}

/// Reconstruction target `A_train + I` stored as sorted neighbour lists,
/// together with the class-balancing constants.
#[derive(Clone, Debug)]
pub struct ReconTarget {
    rows: Vec<Vec<usize>>,
    nnz: usize,
    pub pos_weight: f64,
    pub norm: f64,
}

impl ReconTarget {
    pub fn new(n: usize, edges: &[Edge]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("reconstruction target has no positives"));
        }
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            rows[i].push(j);
            rows[j].push(i);
        }
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let cells = (n * n) as f64;
        let negatives = cells - nnz as f64;
        let (pos_weight, norm) = if negatives == 0.0 {
            // fully positive target
            (1.0, 1.0)
        } else {
            (negatives / nnz as f64, cells / (2.0 * negatives))
        };
        Ok(Self {
            rows,
            nnz,
            pos_weight,
            norm,
        })
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }
}

/// Weighted binary cross-entropy on the logits `Z Zᵀ`, averaged over all N²
/// cells and scaled by `norm`. Returns the loss and its exact gradient
/// with respect to Z. Works row by row, so memory stays O(N·z).
pub fn reconstruction_loss(z: &DenseMatrix, target: &ReconTarget) -> Result<(f64, DenseMatrix)> {
    let n = z.rows();
    if n != target.order() {
        return Err(Error::shape(
            "reconstruction_loss",
            format!("{n} latent rows vs target of order {}", target.order()),
        ));
    }
    let scale = target.norm / (n * n) as f64;
    let pw = target.pos_weight;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(n, z.cols());
    for i in 0..n {
        let zi = z.row(i);
        let positives = &target.rows[i];
        let mut next_pos = 0;
        let mut row_loss = 0.0;
        let mut g_row = vec![0.0; z.cols()];
        for j in 0..n {
            let logit = dot(zi, z.row(j));
            let is_pos = next_pos < positives.len() && positives[next_pos] == j;
            let dlogit = if is_pos {
                next_pos += 1;
                row_loss += pw * softplus(-logit);
                pw * (sigmoid(logit) - 1.0)
            } else {
                row_loss += softplus(logit);
                sigmoid(logit)
            };
            for (g, &zj) in g_row.iter_mut().zip(z.row(j)) {
                *g += dlogit * zj;
            }
        }
        loss += row_loss;
        // logits are symmetric, so d/dzᵢ picks up both (i, j) and (j, i)
        for (out, g) in grad.row_mut(i).iter_mut().zip(&g_row) {
            *out = 2.0 * scale * g;
        }
    }
    Ok((scale * loss, grad))
}

/// KL divergence of `N(μ, σ²)` from `N(0, 1)`, scaled by `1/N`:
/// `−(1/2N) Σ (1 + 2 logσ − μ² − σ²)`. Returns `(loss, dμ, dlogσ)`.
pub fn kl_loss(mu: &DenseMatrix, logsig: &DenseMatrix) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    if mu.shape() != logsig.shape() {
        return Err(Error::shape(
            "kl_loss",
            format!("{:?} vs {:?}", mu.shape(), logsig.shape()),
        ));
    }
    let n = mu.rows() as f64;
    let total: f64 = mu
        .values()
        .iter()
        .zip(logsig.values())
        .map(|(&m, &ls)| 1.0 + 2.0 * ls - m * m - (2.0 * ls).exp())
        .sum();
    let loss = -total / (2.0 * n);
    let dmu = mu.map(|m| m / n);
    let dlogsig = logsig.map(|ls| ((2.0 * ls).exp() - 1.0) / n);
    Ok((loss, dmu, dlogsig))
}

/// `Z = μ + exp(logσ) ⊙ ε` with `ε ~ N(0, I)` drawn from a seeded stream.
pub fn reparameterize(mu: &DenseMatrix, logsig: &DenseMatrix, seed: u64) -> Result<DenseMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(reparameterize_with(mu, logsig, &mut rng)?.0)
}

fn reparameterize_with(
    mu: &DenseMatrix,
    logsig: &DenseMatrix,
    rng: &mut impl Rng,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if mu.shape() != logsig.shape() {
        return Err(Error::shape(
            "reparameterize",
            format!("{:?} vs {:?}", mu.shape(), logsig.shape()),
        ));
    }
    let (r, c) = mu.shape();
    let eps_values: Vec<f64> = (0..r * c).map(|_| rng.sample(StandardNormal)).collect();
    let eps = DenseMatrix::from_vec(r, c, eps_values)?;
    let mut z = mu.clone();
    for ((zv, &ls), &e) in z.values_mut().iter_mut().zip(logsig.values()).zip(eps.values()) {
        *zv += ls.exp() * e;
    }
    Ok((z, eps))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
    t: u64,
}

impl AdamState {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        Self {
            m: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn second_moments(&self) -> &[DenseMatrix] {
        &self.v
    }
}

/// One bias-corrected Adam update applied in place. A non-finite gradient
/// leaves parameters and state untouched and reports the failing step.
pub fn adam_step(
    params: &mut [&mut DenseMatrix],
    grads: &[&DenseMatrix],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            format!("{} params, {} grads, {} moment slots", params.len(), grads.len(), state.m.len()),
        ));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[k].shape() {
            return Err(Error::shape("adam_step", format!("parameter {k}: {:?} vs {:?}", p.shape(), g.shape())));
        }
        if !g.is_finite() {
            return Err(Error::Divergence {
                epoch: state.t as usize + 1,
                detail: format!("non-finite gradient for parameter {k}"),
            });
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[k].values_mut();
        let v = state.v[k].values_mut();
        for (((w, &gi), mi), vi) in p.values_mut().iter_mut().zip(g.values()).zip(m).zip(v) {
            *mi = config.beta1 * *mi + (1.0 - config.beta1) * gi;
            *vi = config.beta2 * *vi + (1.0 - config.beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *w -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden: usize,
    pub latent: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub dropout: f64,
    /// Decision threshold used when `tune_threshold` is off, or when the
    /// split has no validation positives.
    pub threshold: f64,
    /// Choose the decision threshold by validation CONLL after training.
    #[serde(default = "default_true")]
    pub tune_threshold: bool,
    /// Pins the VGAE log-standard-deviation head to a constant (no gradient
    /// flows into it). Used to compare VGAE against a noisy GAE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_log_sigma: Option<f64>,
    /// Weight of the per-node KL term in the VGAE objective. `None` means
    /// 1/N, which keeps the ratio between the cell-averaged reconstruction
    /// term and the KL term the same as in the summed ELBO.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_weight: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Gae,
            hidden: 64,
            latent: 32,
            epochs: 200,
            lr: 0.001,
            seed: 0,
            dropout: 0.0,
            threshold: 0.5,
            tune_threshold: true,
            fixed_log_sigma: None,
            kl_weight: None,
        }
    }
}

fn default_true() -> bool {
    true
}

impl ModelConfig {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be > 0"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::invalid(format!("threshold must be in [0, 1], got {}", self.threshold)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if self.hidden == 0 || self.latent == 0 {
            return Err(Error::invalid("hidden and latent sizes must be positive"));
        }
        if let Some(w) = self.kl_weight {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("kl_weight must be non-negative, got {w}")));
            }
        }
        if self.fixed_log_sigma.is_some() && self.kind != ModelKind::Vgae {
            return Err(Error::invalid("fixed_log_sigma only applies to vgae"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub recon: f64,
    /// Unweighted per-node KL; `loss` adds it times the configured weight.
    pub kl: f64,
    pub val_ap: Option<f64>,
    pub val_auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub feature_kind: FeatureKind,
    pub weights: EncoderWeights,
    pub history: Vec<EpochRecord>,
    /// Final Z (GAE) or μ (VGAE) from a dropout-free pass.
    pub embedding: DenseMatrix,
    /// Probability at or above which a pair is classified coreferent.
    pub decision_threshold: f64,
}

impl TrainedModel {
    pub fn predict_pairs(&self, pairs: &[Edge]) -> Result<Vec<f64>> {
        predict_pairs(self, pairs)
    }
}

pub fn predict_pairs(model: &TrainedModel, pairs: &[Edge]) -> Result<Vec<f64>> {
    score_pairs(&model.embedding, pairs)
}

fn score_pairs(z: &DenseMatrix, pairs: &[Edge]) -> Result<Vec<f64>> {
    let n = z.rows();
    pairs
        .iter()
        .map(|&(i, j)| {
            if i >= n || j >= n {
                Err(Error::invalid(format!("pair ({i}, {j}) out of range for {n} nodes")))
            } else {
                Ok(decode_pair(z, i, j))
            }
        })
        .collect()
}

fn link_metrics(z: &DenseMatrix, pairs: &[Edge], labels: &[bool]) -> Result<(Option<f64>, Option<f64>)> {
    if !labels.contains(&true) || !labels.contains(&false) {
        return Ok((None, None));
    }
    let scores = score_pairs(z, pairs)?;
    Ok((
        Some(average_precision(&scores, labels)?),
        Some(roc_auc(&scores, labels)?),
    ))
}

/// Full-graph training: `epochs` iterations of forward, loss, backward and
/// Adam on the training edges of `split`. Validation AP/AUC are recorded per
/// epoch from the deterministic latents of that epoch's forward pass. The
/// last epoch's weights are kept.
pub fn train(
    graph: &CorefGraph,
    split: &EdgeSplit,
    features: &FeatureMatrix,
    config: &ModelConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let n = graph.len();
    if split.train_pos.is_empty() {
        return Err(Error::invalid("split has no training edges"));
    }
    if features.data.rows() != n {
        return Err(Error::invalid(format!(
            "feature matrix has {} rows, graph has {n} mentions",
            features.data.rows()
        )));
    }

    let adj = normalized_adjacency_sparse(graph, &split.train_pos)?;
    let target = ReconTarget::new(n, &split.train_pos)?;
    let (val_pairs, val_labels) = split.val_pairs();

    let dims = EncoderDims {
        input: features.dim(),
        hidden: config.hidden,
        latent: config.latent,
    };
    let mut weights = init_weights(dims, config.kind, config.seed)?;
    let shapes: Vec<(usize, usize)> = weights.matrices_mut().iter().map(|m| m.shape()).collect();
    let mut adam = AdamState::new(&shapes);
    let adam_config = AdamConfig::with_lr(config.lr);

    // noise and dropout draw from a stream separate from initialization
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let kl_weight = config.kl_weight.unwrap_or(1.0 / n as f64);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut trace = encoder_forward_train(&adj, features, &weights, config.dropout, &mut rng)?;
        if let (Some(fixed), EncoderOutput::Vgae { logsig, .. }) = (config.fixed_log_sigma, &mut trace.output) {
            *logsig = DenseMatrix::filled(logsig.rows(), logsig.cols(), fixed);
        }

        let (recon, kl, out_grads) = match &trace.output {
            EncoderOutput::Gae { z } => {
                let (recon, dz) = reconstruction_loss(z, &target)?;
                (recon, 0.0, OutputGrads::Gae { dz })
            }
            EncoderOutput::Vgae { mu, logsig } => {
                let (z, eps) = reparameterize_with(mu, logsig, &mut rng)?;
                let (recon, dz) = reconstruction_loss(&z, &target)?;
                let (kl, dmu_kl, dls_kl) = kl_loss(mu, logsig)?;
                let dmu_kl = dmu_kl.map(|g| g * kl_weight);
                let dls_kl = dls_kl.map(|g| g * kl_weight);
                let dmu = dz.add(&dmu_kl)?;
                let dlogsig = if config.fixed_log_sigma.is_some() {
                    DenseMatrix::zeros(logsig.rows(), logsig.cols())
                } else {
                    // dZ/dlogσ = exp(logσ) ⊙ ε
                    let mut d = dz.clone();
                    for ((dv, &ls), &e) in d.values_mut().iter_mut().zip(logsig.values()).zip(eps.values()) {
                        *dv *= ls.exp() * e;
                    }
                    d.add(&dls_kl)?
                };
                (recon, kl, OutputGrads::Vgae { dmu, dlogsig })
            }
        };
        let loss = recon + kl_weight * kl;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: format!("loss is {loss}"),
            });
        }

        let (val_ap, val_auc) = link_metrics(trace.output.embedding(), &val_pairs, &val_labels)?;
        history.push(EpochRecord {
            epoch,
            loss,
            recon,
            kl,
            val_ap,
            val_auc,
        });

        let grads = encoder_backward(&trace, &adj, features, &weights, &out_grads)?;
        let grad_refs = grads.matrices();
        adam_step(&mut weights.matrices_mut(), &grad_refs, &mut adam, &adam_config).map_err(|e| match e {
            Error::Divergence { detail, .. } => Error::Divergence { epoch, detail },
            other => other,
        })?;
    }

    let embedding = encoder_forward(&adj, features, &weights)?.output.embedding().clone();
    let decision_threshold = if config.tune_threshold {
        let val_scores = score_pairs(&embedding, &val_pairs)?;
        tune_threshold_on_val(n, split, &val_scores)?.unwrap_or(config.threshold)
    } else {
        config.threshold
    };
    Ok(TrainedModel {
        config: config.clone(),
        feature_kind: features.kind,
        weights,
        history,
        embedding,
        decision_threshold,
    })
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    config: ModelConfig,
    feature_kind: FeatureKind,
    w0: Vec<Vec<f64>>,
    w1: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w_logsig: Option<Vec<Vec<f64>>>,
    embedding: Vec<Vec<f64>>,
    decision_threshold: f64,
    history: Vec<EpochRecord>,
}

fn matrix_from_rows(rows: &[Vec<f64>], cols_if_empty: usize) -> Result<DenseMatrix> {
    if rows.is_empty() {
        return Ok(DenseMatrix::zeros(0, cols_if_empty));
    }
    DenseMatrix::from_rows(rows)
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            feature_kind: self.feature_kind,
            w0: self.weights.w0.to_rows(),
            w1: self.weights.w1.to_rows(),
            w_logsig: self.weights.w_logsig.as_ref().map(DenseMatrix::to_rows),
            embedding: self.embedding.to_rows(),
            decision_threshold: self.decision_threshold,
            history: self.history.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format_version {}",
                file.format_version
            )));
        }
        let weights = EncoderWeights {
            w0: matrix_from_rows(&file.w0, file.config.hidden)?,
            w1: matrix_from_rows(&file.w1, file.config.latent)?,
            w_logsig: file
                .w_logsig
                .as_deref()
                .map(|r| matrix_from_rows(r, file.config.latent))
                .transpose()?,
        };
        if weights.kind() != file.config.kind {
            return Err(Error::invalid("model file heads do not match config.kind"));
        }
        Ok(Self {
            config: file.config,
            feature_kind: file.feature_kind,
            weights,
            history: file.history,
            embedding: matrix_from_rows(&file.embedding, 0)?,
            decision_threshold: file.decision_threshold,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
