//! Helpers shared by the integration tests and the acceptance runner:
//! central-difference gradient checks and deliberately naive scorers.

#![allow(dead_code)]

use std::collections::BTreeSet;

use gaecoref::gcn::{
    encoder_backward, encoder_forward_train, init_weights, EncoderDims, EncoderOutput, EncoderWeights, OutputGrads,
};
use gaecoref::model::{kl_loss, reconstruction_loss, ReconTarget};
use gaecoref::{DenseMatrix, Edge, FeatureMatrix, ModelKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ã = D^-1/2 (A + I) D^-1/2, written out entry by entry.
pub fn naive_normalized_adjacency(n: usize, edges: &[Edge]) -> DenseMatrix {
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(i, j) in edges {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a[i][j] / (deg[i] * deg[j]).sqrt()).collect())
        .collect();
    DenseMatrix::from_rows(&rows).unwrap()
}

pub fn random_edges(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<Edge> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    edges
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let values = (0..rows * cols).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    DenseMatrix::from_vec(rows, cols, values).unwrap()
}

/// Everything a full-loss evaluation needs besides the weights.
pub struct GradProblem {
    pub adj: DenseMatrix,
    pub x: FeatureMatrix,
    pub target: ReconTarget,
    /// Fixed reparameterization noise for VGAE.
    pub eps: DenseMatrix,
    pub kl_weight: f64,
    pub dropout: f64,
    pub dropout_seed: u64,
}

impl GradProblem {
    pub fn random(n: usize, d: usize, z: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random_edges(n, 0.3, &mut rng);
        Self {
            adj: naive_normalized_adjacency(n, &edges),
            x: FeatureMatrix::external(random_matrix(n, d, 1.0, &mut rng)),
            target: ReconTarget::new(n, &edges).unwrap(),
            eps: random_matrix(n, z, 1.0, &mut rng),
            kl_weight: 1.0 / n as f64,
            dropout: 0.0,
            dropout_seed: seed,
        }
    }

    fn forward(&self, w: &EncoderWeights) -> gaecoref::gcn::ForwardTrace {
        // the same seed gives the same dropout mask on every call
        let mut rng = ChaCha8Rng::seed_from_u64(self.dropout_seed);
        encoder_forward_train(&self.adj, &self.x, w, self.dropout, &mut rng).unwrap()
    }

    fn sample(&self, mu: &DenseMatrix, logsig: &DenseMatrix) -> DenseMatrix {
        let mut z = mu.clone();
        for ((v, &ls), &e) in z.values_mut().iter_mut().zip(logsig.values()).zip(self.eps.values()) {
            *v += ls.exp() * e;
        }
        z
    }

    pub fn loss(&self, w: &EncoderWeights) -> f64 {
        match self.forward(w).output {
            EncoderOutput::Gae { z } => reconstruction_loss(&z, &self.target).unwrap().0,
            EncoderOutput::Vgae { mu, logsig } => {
                let z = self.sample(&mu, &logsig);
                reconstruction_loss(&z, &self.target).unwrap().0 + self.kl_weight * kl_loss(&mu, &logsig).unwrap().0
            }
        }
    }

    /// Analytic gradients in the order W0, W1 (or Wμ), Wσ.
    pub fn analytic(&self, w: &EncoderWeights) -> Vec<DenseMatrix> {
        let trace = self.forward(w);
        let grads = match &trace.output {
            EncoderOutput::Gae { z } => OutputGrads::Gae {
                dz: reconstruction_loss(z, &self.target).unwrap().1,
            },
            EncoderOutput::Vgae { mu, logsig } => {
                let z = self.sample(mu, logsig);
                let (_, dz) = reconstruction_loss(&z, &self.target).unwrap();
                let (_, dmu_kl, dls_kl) = kl_loss(mu, logsig).unwrap();
                let dmu = dz.zip_map(&dmu_kl, |a, b| a + self.kl_weight * b).unwrap();
                let mut dlogsig = dz.clone();
                for (k, v) in dlogsig.values_mut().iter_mut().enumerate() {
                    *v = *v * logsig.values()[k].exp() * self.eps.values()[k] + self.kl_weight * dls_kl.values()[k];
                }
                OutputGrads::Vgae { dmu, dlogsig }
            }
        };
        let g = encoder_backward(&trace, &self.adj, &self.x, w, &grads).unwrap();
        g.matrices().into_iter().cloned().collect()
    }
}

fn weight_slot(w: &mut EncoderWeights, k: usize) -> &mut DenseMatrix {
    match k {
        0 => &mut w.w0,
        1 => &mut w.w1,
        _ => w.w_logsig.as_mut().unwrap(),
    }
}

/// Largest entry-wise relative error between analytic and central-difference
/// gradients over all weight matrices. Entries whose gradients are both
/// below 1e-7 in magnitude are compared on that absolute scale.
pub fn max_gradient_error(problem: &GradProblem, weights: &EncoderWeights, h: f64) -> f64 {
    let analytic = problem.analytic(weights);
    let mut worst = 0.0f64;
    for (k, a) in analytic.iter().enumerate() {
        for idx in 0..a.values().len() {
            let mut plus = weights.clone();
            weight_slot(&mut plus, k).values_mut()[idx] += h;
            let mut minus = weights.clone();
            weight_slot(&mut minus, k).values_mut()[idx] -= h;
            let numeric = (problem.loss(&plus) - problem.loss(&minus)) / (2.0 * h);
            let exact = a.values()[idx];
            let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max(rel);
        }
    }
    worst
}

/// The acceptance configuration: 12 nodes, d = 8, h = 6, z = 4, ε = 1e-5.
pub fn standard_gradient_check(kind: ModelKind, seed: u64) -> f64 {
    let problem = GradProblem::random(12, 8, 4, seed);
    let dims = EncoderDims {
        input: 8,
        hidden: 6,
        latent: 4,
    };
    let weights = init_weights(dims, kind, seed + 100).unwrap();
    max_gradient_error(&problem, &weights, 1e-5)
}

/// Chains as sets, for scorers that work on set algebra.
pub fn as_sets(chains: &[Vec<usize>]) -> Vec<BTreeSet<usize>> {
    chains
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| c.iter().copied().collect())
        .collect()
}

fn prf(p_num: f64, p_den: f64, r_num: f64, r_den: f64) -> (f64, f64, f64) {
    let p = if p_den == 0.0 { 0.0 } else { p_num / p_den };
    let r = if r_den == 0.0 { 0.0 } else { r_num / r_den };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// MUC by counting, for each key chain, the number of response pieces it
/// is cut into (mentions missing from the response count as singletons).
pub fn naive_muc(gold: &[Vec<usize>], sys: &[Vec<usize>]) -> (f64, f64, f64) {
    let gold = as_sets(gold);
    let sys = as_sets(sys);
    let side = |key: &[BTreeSet<usize>], resp: &[BTreeSet<usize>]| {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in key {
            let touched = resp.iter().filter(|r| !r.is_disjoint(k)).count();
            let covered: usize = resp.iter().map(|r| r.intersection(k).count()).sum();
            let pieces = touched + (k.len() - covered);
            num += (k.len() - pieces) as f64;
            den += (k.len() - 1) as f64;
        }
        (num, den)
    };
    let (rn, rd) = side(&gold, &sys);
    let (pn, pd) = side(&sys, &gold);
    prf(pn, pd, rn, rd)
}

/// B³ by scanning every mention against both chain lists.
pub fn naive_b_cubed(gold: &[Vec<usize>], sys: &[Vec<usize>]) -> (f64, f64, f64) {
    let gold = as_sets(gold);
    let sys = as_sets(sys);
    let mentions: BTreeSet<usize> = gold.iter().flatten().copied().collect();
    let (mut p, mut r) = (0.0, 0.0);
    for m in &mentions {
        let g = gold.iter().find(|c| c.contains(m)).unwrap();
        let s = sys.iter().find(|c| c.contains(m)).unwrap();
        let shared = g.intersection(s).count() as f64;
        p += shared / s.len() as f64;
        r += shared / g.len() as f64;
    }
    let n = mentions.len() as f64;
    prf(p, n, r, n)
}

/// CEAF-e with φ₄, maximizing over every injective alignment explicitly.
pub fn naive_ceaf_e(gold: &[Vec<usize>], sys: &[Vec<usize>]) -> (f64, f64, f64) {
    let gold = as_sets(gold);
    let sys = as_sets(sys);
    let phi = |a: &BTreeSet<usize>, b: &BTreeSet<usize>| 2.0 * a.intersection(b).count() as f64 / (a.len() + b.len()) as f64;
    fn best(gold: &[BTreeSet<usize>], sys: &[BTreeSet<usize>], g: usize, used: &mut Vec<bool>, phi: &dyn Fn(&BTreeSet<usize>, &BTreeSet<usize>) -> f64) -> f64 {
        if g == gold.len() {
            return 0.0;
        }
        let mut top = best(gold, sys, g + 1, used, phi);
        for s in 0..sys.len() {
            if !used[s] {
                used[s] = true;
                top = top.max(phi(&gold[g], &sys[s]) + best(gold, sys, g + 1, used, phi));
                used[s] = false;
            }
        }
        top
    }
    let total = best(&gold, &sys, 0, &mut vec![false; sys.len()], &phi);
    prf(total, sys.len() as f64, total, gold.len() as f64)
}

/// Random partition of `0..n` into at most `n` chains.
pub fn random_partition(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let k = rng.random_range(1..=n);
    let mut chains = vec![Vec::new(); k];
    for m in 0..n {
        chains[rng.random_range(0..k)].push(m);
    }
    chains.retain(|c| !c.is_empty());
    chains
}

/// AP from its definition: sum over distinct thresholds of recall gain
/// times precision at that threshold.
pub fn naive_average_precision(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let predicted: Vec<bool> = scores.iter().map(|&s| s >= t).collect();
        let tp = predicted.iter().zip(labels).filter(|(p, l)| **p && **l).count() as f64;
        let n_pred = predicted.iter().filter(|&&p| p).count() as f64;
        let recall = tp / pos;
        ap += (recall - prev_recall) * (tp / n_pred);
        prev_recall = recall;
    }
    ap
}

/// AUC as the probability that a random positive outscores a random
/// negative, ties counting one half.
pub fn naive_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}
