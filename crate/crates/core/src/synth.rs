//! Deterministic synthetic cross-document coreference corpora.
//!
//! Each chain gets a latent unit direction `t_c` and a surface template
//! `<lemma> <participant> <location>`. Mention features are
//! `t_c + λ·s_lemma + η·ξ`, where `s_lemma` is a unit direction tied to the
//! mention's surface lemma (lexical signal, as in contextual embeddings) and
//! `ξ` is isotropic Gaussian noise with unit expected squared norm.
//! Confounded chains borrow another chain's lemma and location, producing
//! lexically similar but non-coreferent mentions.

use std::path::Path;

use log::warn;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{write_corpus, write_features, Mention};
use crate::matrix::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    /// Exact total mention count; chain sizes are nudged within
    /// `[chain_min, chain_max]` to hit it. `None` keeps the raw draws.
    pub n_mentions: Option<usize>,
    pub n_chains: usize,
    pub chain_min: usize,
    pub chain_max: usize,
    /// Success probability of the truncated geometric size distribution.
    pub chain_shape: f64,
    pub n_docs: usize,
    pub dim: usize,
    pub noise: f64,
    pub lexical_weight: f64,
    pub lemma_pool: usize,
    pub p_same_lemma: f64,
    pub p_confound: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            n_mentions: Some(500),
            n_chains: 60,
            chain_min: 1,
            chain_max: 40,
            chain_shape: 0.12,
            n_docs: 50,
            dim: 64,
            noise: 0.5,
            lexical_weight: 0.5,
            lemma_pool: 200,
            p_same_lemma: 0.7,
            p_confound: 0.2,
            seed: 0,
        }
    }
}

impl GenParams {
    /// Default preset with more lexical confounds between chains and
    /// features dominated by the surface lemma rather than the chain, so a
    /// similarity baseline over features behaves like a surface matcher.
    pub fn confound_rich() -> Self {
        Self {
            p_confound: 0.4,
            lexical_weight: 2.0,
            ..Self::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be in [0, 1], got {p}")))
            }
        };
        prob("p_same_lemma", self.p_same_lemma)?;
        prob("p_confound", self.p_confound)?;
        if !(self.chain_shape > 0.0 && self.chain_shape <= 1.0) {
            return Err(Error::invalid(format!("chain_shape must be in (0, 1], got {}", self.chain_shape)));
        }
        if self.n_chains == 0 || self.chain_min == 0 || self.chain_max < self.chain_min {
            return Err(Error::invalid("need n_chains ≥ 1 and 1 ≤ chain_min ≤ chain_max"));
        }
        if self.dim == 0 || self.lemma_pool == 0 || self.n_docs == 0 {
            return Err(Error::invalid("dim, lemma_pool and n_docs must be ≥ 1"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) || !(self.lexical_weight >= 0.0) {
            return Err(Error::invalid("noise and lexical_weight must be non-negative"));
        }
        if let Some(n) = self.n_mentions {
            if n < self.n_chains * self.chain_min || n > self.n_chains * self.chain_max {
                return Err(Error::invalid(format!(
                    "{n} mentions cannot be split into {} chains of size {}..={}",
                    self.n_chains, self.chain_min, self.chain_max
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub mentions: Vec<Mention>,
    pub features: DenseMatrix,
    /// Chain index each chain copied its lemma from, if confounded.
    pub confounded_from: Vec<Option<usize>>,
}

impl SyntheticCorpus {
    pub fn write(&self, corpus_path: &Path, features_path: &Path) -> Result<()> {
        write_corpus(corpus_path, &self.mentions)?;
        write_features(features_path, &self.features)
    }
}

const ONSETS: &[&str] = &[
    "b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "br", "st", "tr", "gr", "sp", "kl",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "aa", "ee", "oe", "ij", "ui"];
const CODAS: &[&str] = &["", "n", "r", "s", "t", "k", "l", "ng", "rd", "st"];

fn pseudo_word(rng: &mut impl Rng) -> String {
    let syllables = rng.random_range(1..=4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("non-empty"));
        w.push_str(VOWELS.choose(rng).expect("non-empty"));
        w.push_str(CODAS.choose(rng).expect("non-empty"));
    }
    w
}

fn word_pool(size: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(size);
    let mut attempts = 0;
    while out.len() < size {
        let w = pseudo_word(rng);
        attempts += 1;
        if seen.insert(w.clone()) || attempts > 50 * size {
            out.push(w);
        }
    }
    out
}

fn unit_direction(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn chain_sizes(params: &GenParams, rng: &mut impl Rng) -> Vec<usize> {
    let span = params.chain_max - params.chain_min;
    let q = 1.0 - params.chain_shape;
    let weights: Vec<f64> = (0..=span).map(|k| q.powi(k as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut sizes: Vec<usize> = (0..params.n_chains)
        .map(|_| {
            let mut u = rng.random::<f64>() * total;
            for (k, w) in weights.iter().enumerate() {
                if u < *w {
                    return params.chain_min + k;
                }
                u -= w;
            }
            params.chain_max
        })
        .collect();

    if let Some(target) = params.n_mentions {
        let mut sum: usize = sizes.iter().sum();
        while sum != target {
            let c = rng.random_range(0..sizes.len());
            if sum < target && sizes[c] < params.chain_max {
                sizes[c] += 1;
                sum += 1;
            } else if sum > target && sizes[c] > params.chain_min {
                sizes[c] -= 1;
                sum -= 1;
            }
        }
    }
    sizes
}

/// Generates a corpus. Identical parameters give identical output.
pub fn generate(params: &GenParams) -> Result<SyntheticCorpus> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let sizes = chain_sizes(params, &mut rng);
    let n: usize = sizes.iter().sum();
    if n < params.n_docs {
        return Err(Error::invalid(format!("{n} mentions cannot fill {} documents", params.n_docs)));
    }

    let lemmas = word_pool(params.lemma_pool, &mut rng);
    let participants = word_pool(params.lemma_pool, &mut rng);
    let locations = word_pool(params.lemma_pool, &mut rng);

    if params.lemma_pool < params.n_chains {
        warn!(
            "lemma pool of {} is smaller than {} chains; some chains will share lemmas regardless of p_confound",
            params.lemma_pool, params.n_chains
        );
    }
    let mut lemma_order: Vec<usize> = (0..params.lemma_pool).collect();
    lemma_order.shuffle(&mut rng);
    let mut chain_lemma: Vec<usize> = (0..params.n_chains)
        .map(|c| lemma_order[c % params.lemma_pool])
        .collect();
    let mut chain_location: Vec<usize> = (0..params.n_chains)
        .map(|_| rng.random_range(0..params.lemma_pool))
        .collect();
    let chain_participant: Vec<usize> = (0..params.n_chains)
        .map(|_| rng.random_range(0..params.lemma_pool))
        .collect();

    let mut confounded_from = vec![None; params.n_chains];
    for c in 1..params.n_chains {
        if rng.random::<f64>() < params.p_confound {
            let source = rng.random_range(0..c);
            chain_lemma[c] = chain_lemma[source];
            chain_location[c] = chain_location[source];
            confounded_from[c] = Some(source);
        }
    }

    let centers: Vec<Vec<f64>> = (0..params.n_chains).map(|_| unit_direction(params.dim, &mut rng)).collect();
    let lemma_dirs: Vec<Vec<f64>> = (0..params.lemma_pool).map(|_| unit_direction(params.dim, &mut rng)).collect();

    // chain members are scattered over ids
    let mut slots: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    slots.shuffle(&mut rng);

    let mut docs: Vec<usize> = (0..params.n_docs).collect();
    docs.extend((params.n_docs..n).map(|_| rng.random_range(0..params.n_docs)));
    docs.shuffle(&mut rng);

    let noise_scale = params.noise / (params.dim as f64).sqrt();
    let mut mentions = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * params.dim);
    for (id, &c) in slots.iter().enumerate() {
        let mut pick = |own: usize| {
            if rng.random::<f64>() < params.p_same_lemma {
                own
            } else {
                rng.random_range(0..params.lemma_pool)
            }
        };
        let lemma = pick(chain_lemma[c]);
        let participant = pick(chain_participant[c]);
        let location = pick(chain_location[c]);
        mentions.push(Mention {
            id,
            doc_id: format!("doc{:04}", docs[id]),
            span_text: format!("{} {} {}", lemmas[lemma], participants[participant], locations[location]),
            chain_id: format!("c{c:04}"),
        });
        for k in 0..params.dim {
            let eps: f64 = rng.sample(StandardNormal);
            values.push(centers[c][k] + params.lexical_weight * lemma_dirs[lemma][k] + noise_scale * eps);
        }
    }

    Ok(SyntheticCorpus {
        mentions,
        features: DenseMatrix::from_vec(n, params.dim, values)?,
        confounded_from,
    })
}
