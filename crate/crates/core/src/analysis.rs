//! Difficulty analysis (edit distance of true-positive pairs), a cosine
//! pairwise baseline, and the low-data ablation grid.

use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{subsample_training, CorefGraph, Edge, EdgeSplit, FeatureMatrix};
use crate::matrix::{dot, DenseMatrix};
use crate::metrics::{evaluate_links, LinkEvaluation};
use crate::model::{predict_pairs, train, ModelConfig, TrainedModel};

/// Character-level edit distance (unit-cost insert, delete, substitute)
/// over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TpEntry {
    pub model: String,
    /// `None` when the model produced no true positives.
    pub mean_levenshtein: Option<f64>,
    pub tp_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TpReport {
    pub entries: Vec<TpEntry>,
}

impl TpReport {
    pub fn get(&self, model: &str) -> Option<&TpEntry> {
        self.entries.iter().find(|e| e.model == model)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("model\tlevenshtein_tp\ttp_count\n");
        for e in &self.entries {
            let mean = e.mean_levenshtein.map_or_else(|| "NA".to_string(), |m| format!("{m:.2}"));
            let _ = writeln!(out, "{}\t{mean}\t{}", e.model, e.tp_count);
        }
        out
    }
}

/// Mean span edit distance over pairs that are gold-coreferent and predicted
/// coreferent, per model. Every model must score the same pairs.
pub fn tp_levenshtein_report(
    graph: &CorefGraph,
    pairs: &[Edge],
    gold: &[bool],
    predictions: &[(String, Vec<bool>)],
) -> Result<TpReport> {
    if pairs.len() != gold.len() {
        return Err(Error::invalid(format!("{} pairs vs {} gold labels", pairs.len(), gold.len())));
    }
    let span = |id: usize| {
        graph
            .span(id)
            .ok_or_else(|| Error::invalid(format!("no span for mention {id}")))
    };
    let mut entries = Vec::with_capacity(predictions.len());
    for (model, predicted) in predictions {
        if predicted.len() != pairs.len() {
            return Err(Error::invalid(format!(
                "model {model} scored {} pairs, expected {}",
                predicted.len(),
                pairs.len()
            )));
        }
        let mut total = 0usize;
        let mut count = 0usize;
        for ((&(i, j), &g), &p) in pairs.iter().zip(gold).zip(predicted) {
            if g && p {
                debug_assert!(graph.has_edge(i, j), "gold-positive pair ({i}, {j}) is not an edge");
                total += levenshtein(span(i)?, span(j)?);
                count += 1;
            }
        }
        entries.push(TpEntry {
            model: model.clone(),
            mean_levenshtein: (count > 0).then(|| total as f64 / count as f64),
            tp_count: count,
        });
    }
    Ok(TpReport { entries })
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Mention-pair baseline: a pair is coreferent iff the cosine similarity of
/// the two feature vectors reaches `threshold`. Returns `(pair, decision,
/// score)`.
pub fn cosine_pairwise_baseline(
    features: &DenseMatrix,
    pairs: &[Edge],
    threshold: f64,
) -> Result<Vec<(Edge, bool, f64)>> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("cosine threshold must be in [-1, 1], got {threshold}")));
    }
    let n = features.rows();
    pairs
        .iter()
        .map(|&(i, j)| {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("pair ({i}, {j}) out of range for {n} mentions")));
            }
            let s = cosine(features.row(i), features.row(j));
            Ok(((i, j), s >= threshold, s))
        })
        .collect()
}

fn binary_f1(predicted: impl Iterator<Item = bool>, gold: &[bool]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (p, &g) in predicted.zip(gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Picks the threshold among 101 evenly spaced values in [-1, 1] that
/// maximizes pair F1 on the given (validation) pairs. Ties keep the lowest.
pub fn tune_cosine_threshold(features: &DenseMatrix, pairs: &[Edge], gold: &[bool]) -> Result<f64> {
    let scored = cosine_pairwise_baseline(features, pairs, -1.0)?;
    let mut best = (-1.0, f64::NEG_INFINITY);
    for k in 0..=100 {
        let t = -1.0 + 2.0 * k as f64 / 100.0;
        let f1 = binary_f1(scored.iter().map(|&(_, _, s)| s >= t), gold);
        if f1 > best.1 {
            best = (t, f1);
        }
    }
    Ok(best.0)
}

/// Trains on `split` and evaluates chain reconstruction on its test pairs.
pub fn train_and_evaluate(
    graph: &CorefGraph,
    split: &EdgeSplit,
    features: &FeatureMatrix,
    config: &ModelConfig,
    include_val: bool,
) -> Result<(TrainedModel, LinkEvaluation)> {
    let model = train(graph, split, features, config)?;
    let (pairs, _) = split.test_pairs();
    let scores = predict_pairs(&model, &pairs)?;
    let eval = evaluate_links(graph, split, &scores, model.decision_threshold, include_val)?;
    Ok((model, eval))
}

#[derive(Clone, Debug)]
pub struct AblationVariant {
    pub name: String,
    pub features: FeatureMatrix,
    /// Everything except the seed, which each cell sets.
    pub config: ModelConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellScores {
    pub conll: f64,
    pub ap: Option<f64>,
    pub auc: Option<f64>,
    pub train_edges: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationCell {
    pub variant: String,
    pub fraction: f64,
    pub seed: u64,
    pub outcome: std::result::Result<CellScores, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationResult {
    pub variants: Vec<String>,
    pub fractions: Vec<f64>,
    pub cells: Vec<AblationCell>,
}

/// Runs every (variant, fraction, seed) cell: subsample the training edges
/// relative to the full edge set, train, and score test chains. Val and test
/// stay fixed. Failed cells are recorded and the grid continues. Cells run
/// on `threads` workers; results do not depend on the worker count.
pub fn run_ablation(
    graph: &CorefGraph,
    split: &EdgeSplit,
    variants: &[AblationVariant],
    fractions: &[f64],
    seeds: &[u64],
    threads: usize,
) -> Result<AblationResult> {
    if let Some(f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::invalid(format!("ablation fraction {f} outside (0, 1]")));
    }
    if seeds.is_empty() || variants.is_empty() {
        return Err(Error::invalid("ablation needs at least one variant and one seed"));
    }
    let mut fractions = fractions.to_vec();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();

    let jobs: Vec<(usize, f64, u64)> = (0..variants.len())
        .flat_map(|v| fractions.iter().flat_map(move |&f| seeds.iter().map(move |&s| (v, f, s))))
        .collect();

    let run = |&(v, fraction, seed): &(usize, f64, u64)| {
        let variant = &variants[v];
        let outcome = (|| {
            let sub = subsample_training(split, fraction, seed)?;
            let config = ModelConfig {
                seed,
                ..variant.config.clone()
            };
            let (_, eval) = train_and_evaluate(graph, &sub, &variant.features, &config, true)?;
            Ok::<_, Error>(CellScores {
                conll: eval.report.conll,
                ap: eval.report.ap,
                auc: eval.report.auc,
                train_edges: sub.train_pos.len(),
            })
        })()
        .map_err(|e| {
            warn!("ablation cell {} @ {fraction} (seed {seed}) failed: {e}", variant.name);
            e.to_string()
        });
        AblationCell {
            variant: variant.name.clone(),
            fraction,
            seed,
            outcome,
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let cells = pool.install(|| jobs.par_iter().map(run).collect());

    Ok(AblationResult {
        variants: variants.iter().map(|v| v.name.clone()).collect(),
        fractions,
        cells,
    })
}

fn percent_label(fraction: f64) -> String {
    let p = fraction * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}", p.round() as i64)
    } else {
        format!("{p:.1}")
    }
}

impl AblationResult {
    /// Mean CONLL over the successful seeds of one cell.
    pub fn mean_conll(&self, variant: &str, fraction: f64) -> Option<f64> {
        let scores: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.variant == variant && c.fraction == fraction)
            .filter_map(|c| c.outcome.as_ref().ok().map(|s| s.conll))
            .collect();
        (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
    }

    /// Grid layout: one row per variant, one column per training percentage.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("model");
        for &f in &self.fractions {
            let _ = write!(out, "\t{}", percent_label(f));
        }
        out.push('\n');
        for v in &self.variants {
            out.push_str(v);
            for &f in &self.fractions {
                match self.mean_conll(v, f) {
                    Some(c) => {
                        let _ = write!(out, "\t{c:.3}");
                    }
                    None => out.push_str("\tNA"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// One line per cell, including failures.
    pub fn to_long_tsv(&self) -> String {
        let mut out = String::from("model\tfraction\tseed\tconll\tap\tauc\ttrain_edges\terror\n");
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        for c in &self.cells {
            match &c.outcome {
                Ok(s) => {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{:.6}\t{}\t{}\t{}\t",
                        c.variant,
                        c.fraction,
                        c.seed,
                        s.conll,
                        opt(s.ap),
                        opt(s.auc),
                        s.train_edges
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, "{}\t{}\t{}\tNA\tNA\tNA\tNA\t{e}", c.variant, c.fraction, c.seed);
                }
            }
        }
        out
    }

    /// Line plot of CONLL F1 against training percentage, one line per
    /// variant.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const LEFT: f64 = 60.0;
        const RIGHT: f64 = 160.0;
        const TOP: f64 = 20.0;
        const BOTTOM: f64 = 50.0;
        const COLORS: &[&str] = &["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"];

        let (fmin, fmax) = match (self.fractions.first(), self.fractions.last()) {
            (Some(&a), Some(&b)) if b > a => (a, b),
            (Some(&a), _) => (a - 0.05, a + 0.05),
            _ => (0.0, 1.0),
        };
        let values: Vec<f64> = self
            .variants
            .iter()
            .flat_map(|v| self.fractions.iter().filter_map(move |&f| self.mean_conll(v, f)))
            .collect();
        let ymin = (values.iter().copied().fold(1.0f64, f64::min).min(0.5) * 10.0).floor() / 10.0;
        let ymax = 1.0;
        let x = |f: f64| LEFT + (f - fmin) / (fmax - fmin) * (W - LEFT - RIGHT);
        let y = |c: f64| TOP + (ymax - c) / (ymax - ymin) * (H - TOP - BOTTOM);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            H - BOTTOM,
            W - RIGHT,
            H - BOTTOM
        );
        let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#, H - BOTTOM);
        for &f in &self.fractions {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
                x(f),
                H - BOTTOM + 16.0,
                percent_label(f)
            );
        }
        let steps = ((ymax - ymin) / 0.1).round() as usize;
        for k in 0..=steps {
            let c = ymin + k as f64 * 0.1;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{c:.1}</text>"#,
                LEFT - 6.0,
                y(c) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">training edges (% of all edges)</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 12.0
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">CONLL F1</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0
        );
        for (k, v) in self.variants.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let points: Vec<String> = self
                .fractions
                .iter()
                .filter_map(|&f| self.mean_conll(v, f).map(|c| format!("{:.1},{:.1}", x(f), y(c))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                points.join(" ")
            );
            let ly = TOP + 14.0 * k as f64 + 10.0;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                W - RIGHT + 10.0,
                W - RIGHT + 30.0,
                W - RIGHT + 35.0,
                ly + 4.0,
                xml_escape(v)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
