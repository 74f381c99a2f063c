//! Chain reconstruction from predicted links and coreference scoring:
//! MUC, B³, CEAF-e (φ₄), CONLL F1, plus link-level AP and ROC-AUC.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_assignment;
use crate::error::{Error, Result};
use crate::graph::{CorefGraph, Edge, EdgeSplit};

/// A partition of mention ids `0..n` into chains. Chains are kept sorted,
/// and ordered by their smallest member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clustering {
    chains: Vec<Vec<usize>>,
    chain_of: Vec<usize>,
}

impl Clustering {
    pub fn from_chains(n: usize, chains: Vec<Vec<usize>>) -> Result<Self> {
        let mut chains: Vec<Vec<usize>> = chains.into_iter().filter(|c| !c.is_empty()).collect();
        for c in &mut chains {
            c.sort_unstable();
        }
        chains.sort_unstable_by_key(|c| c[0]);
        let mut chain_of = vec![usize::MAX; n];
        for (k, chain) in chains.iter().enumerate() {
            for &m in chain {
                if m >= n {
                    return Err(Error::invalid(format!("mention {m} out of range for {n} mentions")));
                }
                if chain_of[m] != usize::MAX {
                    return Err(Error::invalid(format!("mention {m} appears in more than one chain")));
                }
                chain_of[m] = k;
            }
        }
        if let Some(m) = chain_of.iter().position(|&k| k == usize::MAX) {
            return Err(Error::invalid(format!("mention {m} is not in any chain")));
        }
        Ok(Self { chains, chain_of })
    }

    /// Partition from per-mention labels.
    pub fn from_labels<L: Ord + Clone>(labels: &[L]) -> Self {
        let mut groups: BTreeMap<L, Vec<usize>> = BTreeMap::new();
        for (m, l) in labels.iter().enumerate() {
            groups.entry(l.clone()).or_default().push(m);
        }
        Self::from_chains(labels.len(), groups.into_values().collect()).expect("labels partition 0..n")
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_chains(n, (0..n).map(|m| vec![m]).collect()).expect("valid partition")
    }

    pub fn chains(&self) -> &[Vec<usize>] {
        &self.chains
    }

    pub fn chain_of(&self, mention: usize) -> usize {
        self.chain_of[mention]
    }

    pub fn mention_count(&self) -> usize {
        self.chain_of.len()
    }

    fn chain_size(&self, mention: usize) -> usize {
        self.chains[self.chain_of[mention]].len()
    }
}

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }

    pub fn into_clustering(mut self) -> Clustering {
        let labels: Vec<usize> = (0..self.parent.len()).map(|x| self.find(x)).collect();
        Clustering::from_labels(&labels)
    }
}

/// Chains are the connected components of the observed edges plus every
/// test pair classified as coreferent; unlinked mentions stay singletons.
pub fn reconstruct_chains(observed: &[Edge], classified: &[(Edge, bool)], n: usize) -> Result<Clustering> {
    let mut uf = UnionFind::new(n);
    let positive = classified.iter().filter(|(_, p)| *p).map(|(e, _)| e);
    for &(i, j) in observed.iter().chain(positive) {
        if i >= n || j >= n {
            return Err(Error::invalid(format!("pair ({i}, {j}) out of range for {n} mentions")));
        }
        uf.union(i, j);
    }
    Ok(uf.into_clustering())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a denominator was zero and the affected score defaulted to 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            degenerate: false,
        }
    }
}

fn check_universe(gold: &Clustering, sys: &Clustering) -> Result<()> {
    if gold.mention_count() != sys.mention_count() {
        return Err(Error::invalid(format!(
            "gold has {} mentions, system has {}",
            gold.mention_count(),
            sys.mention_count()
        )));
    }
    Ok(())
}

/// Σ over chains of `(|S| − |p(S)|)` and `(|S| − 1)`, where `p(S)` is the
/// set of `other` chains that intersect `S`.
fn muc_counts(key: &Clustering, other: &Clustering) -> (usize, usize) {
    let mut num = 0;
    let mut den = 0;
    for chain in key.chains() {
        let mut parts: Vec<usize> = chain.iter().map(|&m| other.chain_of(m)).collect();
        parts.sort_unstable();
        parts.dedup();
        num += chain.len() - parts.len();
        den += chain.len() - 1;
    }
    (num, den)
}

pub fn muc(gold: &Clustering, sys: &Clustering) -> Result<Prf> {
    check_universe(gold, sys)?;
    let (r_num, r_den) = muc_counts(gold, sys);
    let (p_num, p_den) = muc_counts(sys, gold);
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let mut prf = Prf::new(ratio(p_num, p_den), ratio(r_num, r_den));
    prf.degenerate = r_den == 0 || p_den == 0;
    Ok(prf)
}

fn overlaps(gold: &Clustering, sys: &Clustering) -> HashMap<(usize, usize), usize> {
    let mut counts = HashMap::new();
    for m in 0..gold.mention_count() {
        *counts.entry((gold.chain_of(m), sys.chain_of(m))).or_insert(0) += 1;
    }
    counts
}

pub fn b_cubed(gold: &Clustering, sys: &Clustering) -> Result<Prf> {
    check_universe(gold, sys)?;
    let n = gold.mention_count();
    if n == 0 {
        return Ok(Prf::default());
    }
    let counts = overlaps(gold, sys);
    let mut p = 0.0;
    let mut r = 0.0;
    for m in 0..n {
        let shared = counts[&(gold.chain_of(m), sys.chain_of(m))] as f64;
        p += shared / sys.chain_size(m) as f64;
        r += shared / gold.chain_size(m) as f64;
    }
    Ok(Prf::new(p / n as f64, r / n as f64))
}

/// Entity-based CEAF with φ₄(R, S) = 2|R ∩ S| / (|R| + |S|). The optimal
/// alignment is solved per connected block of overlapping chains, since
/// non-overlapping chains contribute nothing.
pub fn ceaf_e(gold: &Clustering, sys: &Clustering) -> Result<Prf> {
    check_universe(gold, sys)?;
    if gold.chains().is_empty() {
        return Ok(Prf::default());
    }
    let counts = overlaps(gold, sys);
    let total = ceaf_similarity(gold, sys, &counts);
    Ok(Prf::new(
        total / sys.chains().len() as f64,
        total / gold.chains().len() as f64,
    ))
}

fn ceaf_similarity(gold: &Clustering, sys: &Clustering, counts: &HashMap<(usize, usize), usize>) -> f64 {
    let n_gold = gold.chains().len();
    let mut uf = UnionFind::new(n_gold + sys.chains().len());
    for &(g, s) in counts.keys() {
        uf.union(g, n_gold + s);
    }
    let mut blocks: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for g in 0..n_gold {
        blocks.entry(uf.find(g)).or_default().0.push(g);
    }
    for s in 0..sys.chains().len() {
        blocks.entry(uf.find(n_gold + s)).or_default().1.push(s);
    }

    let mut total = 0.0;
    for (gs, ss) in blocks.values() {
        let weights: Vec<Vec<f64>> = gs
            .iter()
            .map(|&g| {
                ss.iter()
                    .map(|&s| {
                        let shared = counts.get(&(g, s)).copied().unwrap_or(0) as f64;
                        2.0 * shared / (gold.chains()[g].len() + sys.chains()[s].len()) as f64
                    })
                    .collect()
            })
            .collect();
        total += max_weight_assignment(&weights).1;
    }
    total
}

pub fn conll_f1(gold: &Clustering, sys: &Clustering) -> Result<f64> {
    Ok((muc(gold, sys)?.f1 + b_cubed(gold, sys)?.f1 + ceaf_e(gold, sys)?.f1) / 3.0)
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if !labels.contains(&true) || !labels.contains(&false) {
        return Err(Error::invalid("ranking metrics need at least one positive and one negative"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }
    Ok(())
}

/// Average precision over a descending ranking. Tied scores form one
/// threshold, so the result does not depend on input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let positives = labels.iter().filter(|&&l| l).count() as f64;

    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        let mut group_tp = 0;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            group_tp += usize::from(labels[order[end]]);
            end += 1;
        }
        tp += group_tp;
        seen += end - k;
        if group_tp > 0 {
            ap += (group_tp as f64 / positives) * (tp as f64 / seen as f64);
        }
        k = end;
    }
    Ok(ap)
}

/// ROC-AUC via the rank-sum statistic with average ranks for ties.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        // ranks k+1..=end share their mean
        let avg_rank = (k + 1 + end) as f64 / 2.0;
        rank_sum_pos += avg_rank * order[k..end].iter().filter(|&&i| labels[i]).count() as f64;
        k = end;
    }
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    Ok((rank_sum_pos - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub muc: Prf,
    pub b3: Prf,
    pub ceaf_e: Prf,
    pub conll: f64,
    pub ap: Option<f64>,
    pub auc: Option<f64>,
}

impl ScoreReport {
    pub fn chains_only(gold: &Clustering, sys: &Clustering) -> Result<Self> {
        let muc = muc(gold, sys)?;
        let b3 = b_cubed(gold, sys)?;
        let ceaf_e = ceaf_e(gold, sys)?;
        Ok(Self {
            muc,
            b3,
            ceaf_e,
            conll: (muc.f1 + b3.f1 + ceaf_e.f1) / 3.0,
            ap: None,
            auc: None,
        })
    }
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>9} {:>9} {:>9}", "metric", "P", "R", "F1")?;
        for (name, prf) in [("MUC", &self.muc), ("B3", &self.b3), ("CEAF-e", &self.ceaf_e)] {
            writeln!(f, "{name:<8} {:>9.4} {:>9.4} {:>9.4}", prf.precision, prf.recall, prf.f1)?;
        }
        writeln!(f, "{:<8} {:>29.4}", "CONLL", self.conll)?;
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        writeln!(f, "{:<8} {:>29}", "AP", opt(self.ap))?;
        write!(f, "{:<8} {:>29}", "AUC", opt(self.auc))
    }
}

#[derive(Clone, Debug)]
pub struct LinkEvaluation {
    pub report: ScoreReport,
    pub chains: Clustering,
    /// Test pairs (positives first) with their thresholded decision.
    pub classified: Vec<(Edge, bool)>,
}

/// Thresholds the scores of the split's test pairs (in `test_pairs()` order),
/// rebuilds chains on top of the observed edges and scores them against the
/// gold chains. Val positives count as observed unless `include_val` is off.
pub fn evaluate_links(
    graph: &CorefGraph,
    split: &EdgeSplit,
    test_scores: &[f64],
    threshold: f64,
    include_val: bool,
) -> Result<LinkEvaluation> {
    let (pairs, labels) = split.test_pairs();
    if pairs.len() != test_scores.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} test pairs",
            test_scores.len(),
            pairs.len()
        )));
    }
    let classified: Vec<(Edge, bool)> = pairs
        .iter()
        .zip(test_scores)
        .map(|(&e, &s)| (e, s >= threshold))
        .collect();
    let mut observed = split.train_pos.clone();
    if include_val {
        observed.extend_from_slice(&split.val_pos);
    }
    let chains = reconstruct_chains(&observed, &classified, graph.len())?;
    let mut report = ScoreReport::chains_only(&graph.gold_clustering(), &chains)?;
    if labels.contains(&true) && labels.contains(&false) {
        report.ap = Some(average_precision(test_scores, &labels)?);
        report.auc = Some(roc_auc(test_scores, &labels)?);
    }
    Ok(LinkEvaluation {
        report,
        chains,
        classified,
    })
}

/// Picks the decision threshold from a 101-point grid on [0, 1] that
/// maximizes CONLL F1 on the validation pairs. The reference chains are the
/// components of train ∪ val positives and the system chains add the val
/// pairs scored at or above the threshold to the train edges, so no test
/// information is used. Ties keep the lowest threshold. Returns `None`
/// when the split has no validation pairs.
pub fn tune_threshold_on_val(n: usize, split: &EdgeSplit, val_scores: &[f64]) -> Result<Option<f64>> {
    let (pairs, _) = split.val_pairs();
    if pairs.len() != val_scores.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} validation pairs",
            val_scores.len(),
            pairs.len()
        )));
    }
    if split.val_pos.is_empty() {
        return Ok(None);
    }
    let known: Vec<Edge> = split.train_pos.iter().chain(&split.val_pos).copied().collect();
    let reference = reconstruct_chains(&known, &[], n)?;

    let mut best: Option<(f64, f64)> = None;
    let mut last_positive_count = usize::MAX;
    let mut last_score = 0.0;
    for k in 0..=100 {
        let t = k as f64 / 100.0;
        let classified: Vec<(Edge, bool)> = pairs.iter().zip(val_scores).map(|(&e, &s)| (e, s >= t)).collect();
        let positives = classified.iter().filter(|c| c.1).count();
        // the same decisions give the same score
        let score = if positives == last_positive_count {
            last_score
        } else {
            let sys = reconstruct_chains(&split.train_pos, &classified, n)?;
            conll_f1(&reference, &sys)?
        };
        last_positive_count = positives;
        last_score = score;
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((t, score));
        }
    }
    Ok(best.map(|(t, _)| t))
}

#[derive(Serialize, Deserialize)]
struct ChainLine {
    chain: Vec<usize>,
}

pub fn write_chains(path: &Path, clustering: &Clustering) -> Result<()> {
    let mut text = String::new();
    for chain in clustering.chains() {
        text.push_str(&serde_json::to_string(&ChainLine { chain: chain.clone() })?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a chain file. Mentions that appear in no chain become singletons.
pub fn read_chains(path: &Path, n: usize) -> Result<Clustering> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut chains = Vec::new();
    let mut seen = vec![false; n];
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ChainLine =
            serde_json::from_str(line).map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        for &m in &parsed.chain {
            if m >= n {
                return Err(Error::parse(path, lineno + 1, format!("mention {m} out of range")));
            }
            if std::mem::replace(&mut seen[m], true) {
                return Err(Error::parse(path, lineno + 1, format!("mention {m} listed twice")));
            }
        }
        chains.push(parsed.chain);
    }
    chains.extend(seen.iter().enumerate().filter(|(_, &s)| !s).map(|(m, _)| vec![m]));
    Clustering::from_chains(n, chains)
}
