//! Coreference graph data model: mentions as nodes, coreference links as
//! undirected edges, plus the edge masking protocol and node features.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, DenseMatrix};
use crate::metrics::Clustering;

/// Unordered node pair, always stored as `(low, high)`.
pub type Edge = (usize, usize);

#[inline]
pub fn ordered(i: usize, j: usize) -> Edge {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// One line of the corpus JSONL file. Unknown fields are ignored so that
/// corpora extended with context and span offsets load unchanged.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub id: usize,
    pub doc_id: String,
    pub span_text: String,
    pub chain_id: String,
}

#[derive(Clone, Debug)]
pub struct CorefGraph {
    mentions: Vec<Mention>,
    edges: Vec<Edge>,
    edge_set: HashSet<Edge>,
}

impl CorefGraph {
    /// Builds the gold graph: every pair of mentions sharing a chain id is
    /// linked, so each chain becomes a clique.
    pub fn build(records: Vec<Mention>) -> Result<Self> {
        let mentions = validate_mentions(records)?;
        let mut chains: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for m in &mentions {
            chains.entry(m.chain_id.as_str()).or_default().push(m.id);
        }
        let mut edges = Vec::new();
        for members in chains.values() {
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    edges.push(ordered(i, j));
                }
            }
        }
        edges.sort_unstable();
        let edge_set = edges.iter().copied().collect();
        Ok(Self {
            mentions,
            edges,
            edge_set,
        })
    }

    /// Builds a graph with an explicit edge set (not necessarily cliques).
    pub fn with_edges(records: Vec<Mention>, edges: &[Edge]) -> Result<Self> {
        let mentions = validate_mentions(records)?;
        let n = mentions.len();
        let mut set = HashSet::with_capacity(edges.len());
        for &(i, j) in edges {
            check_pair(n, i, j)?;
            set.insert(ordered(i, j));
        }
        let mut edges: Vec<Edge> = set.iter().copied().collect();
        edges.sort_unstable();
        Ok(Self {
            mentions,
            edges,
            edge_set: set,
        })
    }

    pub fn len(&self) -> usize {
        self.mentions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }

    pub fn mentions(&self) -> &[Mention] {
        &self.mentions
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_set.contains(&ordered(i, j))
    }

    /// Gold partition induced by chain ids.
    pub fn gold_clustering(&self) -> Clustering {
        let mut chains: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for m in &self.mentions {
            chains.entry(m.chain_id.as_str()).or_default().push(m.id);
        }
        Clustering::from_chains(self.len(), chains.into_values().collect())
            .expect("chain ids partition the mentions")
    }

    pub fn span(&self, id: usize) -> Option<&str> {
        self.mentions.get(id).map(|m| m.span_text.as_str())
    }
}

fn validate_mentions(mut records: Vec<Mention>) -> Result<Vec<Mention>> {
    if records.is_empty() {
        return Err(Error::invalid("empty mention list"));
    }
    records.sort_by_key(|m| m.id);
    for pair in records.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(Error::invalid(format!("duplicate mention id {}", pair[0].id)));
        }
    }
    for (expected, m) in records.iter().enumerate() {
        if m.id != expected {
            return Err(Error::invalid(format!(
                "mention ids must be dense 0..{}; missing id {expected}",
                records.len()
            )));
        }
        if m.span_text.is_empty() {
            return Err(Error::invalid(format!("mention {} has empty span_text", m.id)));
        }
    }
    Ok(records)
}

fn check_pair(n: usize, i: usize, j: usize) -> Result<()> {
    if i >= n || j >= n {
        return Err(Error::invalid(format!("pair ({i}, {j}) out of range for {n} nodes")));
    }
    if i == j {
        return Err(Error::invalid(format!("self-loop ({i}, {i})")));
    }
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<Mention>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let m: Mention = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        out.push(m);
    }
    Ok(out)
}

pub fn write_corpus(path: &Path, mentions: &[Mention]) -> Result<()> {
    let mut text = String::new();
    for m in mentions {
        text.push_str(&serde_json::to_string(m)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Symmetrically normalized adjacency with self-loops,
/// `D^-1/2 (A + I) D^-1/2`, built from the observed edges only.
pub fn normalized_adjacency_sparse(graph: &CorefGraph, observed: &[Edge]) -> Result<CsrMatrix> {
    let n = graph.len();
    let mut unique = HashSet::with_capacity(observed.len());
    for &(i, j) in observed {
        check_pair(n, i, j)?;
        unique.insert(ordered(i, j));
    }
    let mut degree = vec![1.0f64; n];
    for &(i, j) in &unique {
        degree[i] += 1.0;
        degree[j] += 1.0;
    }
    let sqrt_deg: Vec<f64> = degree.iter().map(|d| d.sqrt()).collect();
    let weight = |i: usize, j: usize| 1.0 / (sqrt_deg[i] * sqrt_deg[j]);

    let mut triplets = Vec::with_capacity(n + 2 * unique.len());
    for i in 0..n {
        triplets.push((i, i, weight(i, i)));
    }
    for &(i, j) in &unique {
        let w = weight(i, j);
        triplets.push((i, j, w));
        triplets.push((j, i, w));
    }
    CsrMatrix::from_triplets(n, n, &triplets)
}

pub fn normalized_adjacency(graph: &CorefGraph, observed: &[Edge]) -> Result<DenseMatrix> {
    Ok(normalized_adjacency_sparse(graph, observed)?.to_dense())
}

/// Which part of the experiment a pair belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Train,
    Val,
    Test,
}

impl SplitPart {
    fn as_str(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::Val => "val",
            SplitPart::Test => "test",
        }
    }
}

/// Disjoint train/val/test positive edges plus balanced negatives for
/// val and test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSplit {
    pub train_pos: Vec<Edge>,
    pub val_pos: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub val_neg: Vec<Edge>,
    pub test_neg: Vec<Edge>,
    pub seed: u64,
}

impl EdgeSplit {
    pub fn total_pos(&self) -> usize {
        self.train_pos.len() + self.val_pos.len() + self.test_pos.len()
    }

    /// `(pairs, labels)` for val, positives first.
    pub fn val_pairs(&self) -> (Vec<Edge>, Vec<bool>) {
        labelled(&self.val_pos, &self.val_neg)
    }

    pub fn test_pairs(&self) -> (Vec<Edge>, Vec<bool>) {
        labelled(&self.test_pos, &self.test_neg)
    }
}

fn labelled(pos: &[Edge], neg: &[Edge]) -> (Vec<Edge>, Vec<bool>) {
    let pairs = pos.iter().chain(neg).copied().collect();
    let labels = std::iter::repeat_n(true, pos.len())
        .chain(std::iter::repeat_n(false, neg.len()))
        .collect();
    (pairs, labels)
}

#[inline]
pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Masks `val_frac` and `test_frac` of the edges and samples an equal number
/// of non-edges for each held-out part.
pub fn split_edges(graph: &CorefGraph, val_frac: f64, test_frac: f64, seed: u64) -> Result<EdgeSplit> {
    if !(0.0..1.0).contains(&val_frac) || !(0.0..1.0).contains(&test_frac) || val_frac + test_frac >= 1.0 {
        return Err(Error::invalid(format!(
            "split fractions must be non-negative with val + test < 1 (got {val_frac} + {test_frac})"
        )));
    }
    let total = graph.edges().len();
    if total == 0 {
        return Err(Error::invalid("graph has no edges to split"));
    }
    let n_val = round_half_up(val_frac * total as f64);
    let n_test = round_half_up(test_frac * total as f64);
    if n_val + n_test > total {
        return Err(Error::invalid("held-out edges exceed edge count"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = graph.edges().to_vec();
    shuffled.shuffle(&mut rng);
    let mut val_pos = shuffled[..n_val].to_vec();
    let mut test_pos = shuffled[n_val..n_val + n_test].to_vec();
    let mut train_pos = shuffled[n_val + n_test..].to_vec();

    let negatives = sample_non_edges(graph, n_val + n_test, &mut rng)?;
    let mut val_neg = negatives[..n_val].to_vec();
    let mut test_neg = negatives[n_val..].to_vec();

    for part in [&mut train_pos, &mut val_pos, &mut test_pos, &mut val_neg, &mut test_neg] {
        part.sort_unstable();
    }
    Ok(EdgeSplit {
        train_pos,
        val_pos,
        test_pos,
        val_neg,
        test_neg,
        seed,
    })
}

/// Uniform sample of `count` distinct non-edges (no self-loops).
fn sample_non_edges(graph: &CorefGraph, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Edge>> {
    let n = graph.len();
    let all_pairs = n * n.saturating_sub(1) / 2;
    let available = all_pairs - graph.edges().len();
    if count > available {
        return Err(Error::TooDense {
            needed: count,
            available,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }

    if 2 * count > available {
        // dense regime: enumerate and shuffle instead of rejection sampling
        let mut pool: Vec<Edge> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !graph.has_edge(i, j))
            .collect();
        pool.shuffle(rng);
        pool.truncate(count);
        return Ok(pool);
    }

    let mut chosen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let pair = ordered(i, j);
        if graph.has_edge(pair.0, pair.1) || !chosen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    Ok(out)
}

/// Keeps `round(fraction · |E|)` training edges, sized relative to the full
/// edge set and capped at what the split has available. Val and test are
/// left untouched.
pub fn subsample_training(split: &EdgeSplit, fraction: f64, seed: u64) -> Result<EdgeSplit> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("training fraction must be in (0, 1], got {fraction}")));
    }
    let requested = round_half_up(fraction * split.total_pos() as f64);
    let available = split.train_pos.len();
    let keep = if requested > available {
        warn!("requested {requested} training edges but only {available} are available; using all");
        available
    } else {
        requested
    };

    let mut out = split.clone();
    if keep < available {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sampled: Vec<Edge> = split.train_pos.choose_multiple(&mut rng, keep).copied().collect();
        sampled.sort_unstable();
        out.train_pos = sampled;
    }
    Ok(out)
}

/// Writes the split as `i<TAB>j<TAB>part<TAB>pos|neg` lines, preceded by a
/// `# seed` comment.
pub fn write_split(path: &Path, split: &EdgeSplit) -> Result<()> {
    let mut text = format!("# seed\t{}\n", split.seed);
    let parts: [(&[Edge], SplitPart, &str); 5] = [
        (&split.train_pos, SplitPart::Train, "pos"),
        (&split.val_pos, SplitPart::Val, "pos"),
        (&split.test_pos, SplitPart::Test, "pos"),
        (&split.val_neg, SplitPart::Val, "neg"),
        (&split.test_neg, SplitPart::Test, "neg"),
    ];
    for (edges, part, label) in parts {
        for &(i, j) in edges {
            let _ = writeln!(text, "{i}\t{j}\t{}\t{label}", part.as_str());
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_split(path: &Path) -> Result<EdgeSplit> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut split = EdgeSplit {
        train_pos: Vec::new(),
        val_pos: Vec::new(),
        test_pos: Vec::new(),
        val_neg: Vec::new(),
        test_neg: Vec::new(),
        seed: 0,
    };
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut fields = rest.split('\t').map(str::trim);
            if fields.next() == Some("seed") {
                if let Some(v) = fields.next() {
                    split.seed = v
                        .parse()
                        .map_err(|_| Error::parse(path, lineno, format!("bad seed {v:?}")))?;
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(path, lineno, format!("expected 4 fields, got {}", fields.len())));
        }
        let parse_id = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(path, lineno, format!("bad node id {s:?}")))
        };
        let (i, j) = (parse_id(fields[0])?, parse_id(fields[1])?);
        if i == j {
            return Err(Error::parse(path, lineno, "self-loop"));
        }
        let pair = ordered(i, j);
        let target = match (fields[2], fields[3]) {
            ("train", "pos") => &mut split.train_pos,
            ("val", "pos") => &mut split.val_pos,
            ("test", "pos") => &mut split.test_pos,
            ("val", "neg") => &mut split.val_neg,
            ("test", "neg") => &mut split.test_neg,
            (p, l) => return Err(Error::parse(path, lineno, format!("unknown part/label {p}/{l}"))),
        };
        target.push(pair);
    }
    Ok(split)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    External,
    Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub data: DenseMatrix,
    pub kind: FeatureKind,
}

impl FeatureMatrix {
    /// Featureless setting: `X = I`.
    pub fn identity(graph: &CorefGraph) -> Self {
        Self {
            data: DenseMatrix::identity(graph.len()),
            kind: FeatureKind::Identity,
        }
    }

    pub fn external(data: DenseMatrix) -> Self {
        Self {
            data,
            kind: FeatureKind::External,
        }
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }
}

/// Loads the feature TSV: one row per mention, first column the mention id,
/// remaining columns the vector.
pub fn load_features(path: &Path, graph: &CorefGraph) -> Result<FeatureMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let n = graph.len();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut dim: Option<usize> = None;
    let mut count = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        count += 1;
        let mut fields = line.split('\t');
        let id_field = fields.next().unwrap_or_default();
        let id: usize = id_field
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad mention id {id_field:?}")))?;
        if id >= n {
            return Err(Error::parse(
                path,
                lineno,
                format!("mention id {id} out of range; corpus has {n} mentions"),
            ));
        }
        let mut values = Vec::new();
        for field in fields {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad value {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, lineno, format!("non-finite value {field:?}")));
            }
            values.push(v);
        }
        match dim {
            None if values.is_empty() => {
                return Err(Error::parse(path, lineno, "row has no feature values"));
            }
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("ragged row: {} values, expected {d}", values.len()),
                ));
            }
            Some(_) => {}
        }
        if rows[id].is_some() {
            return Err(Error::parse(path, lineno, format!("duplicate mention id {id}")));
        }
        rows[id] = Some(values);
    }
    if count != n {
        return Err(Error::parse(
            path,
            count,
            format!("feature file has {count} rows, corpus has {n} mentions"),
        ));
    }
    let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.expect("all ids present")).collect();
    Ok(FeatureMatrix::external(DenseMatrix::from_rows(&rows)?))
}

pub fn write_features(path: &Path, features: &DenseMatrix) -> Result<()> {
    let mut text = String::new();
    for i in 0..features.rows() {
        let _ = write!(text, "{i}");
        for v in features.row(i) {
            let _ = write!(text, "\t{v}");
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn mention(id: usize, chain: &str) -> Mention {
        Mention {
            id,
            doc_id: format!("d{}", id % 2),
            span_text: format!("event {id}"),
            chain_id: chain.to_string(),
        }
    }

    fn graph(chains: &[&str]) -> CorefGraph {
        CorefGraph::build(chains.iter().enumerate().map(|(i, c)| mention(i, c)).collect()).unwrap()
    }

    #[test]
    fn chains_become_cliques() {
        let g = graph(&["x", "x", "x", "y"]);
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(graph(&["x"]).edges().len(), 0);
        let g = graph(&["a", "b", "a", "b"]);
        assert_eq!(g.edges(), &[(0, 2), (1, 3)]);
        assert_eq!(g.gold_clustering().chains().len(), 2);
    }

    #[test]
    fn build_rejects_bad_records() {
        assert!(CorefGraph::build(vec![]).is_err());
        assert!(CorefGraph::build(vec![mention(0, "a"), mention(0, "b")]).is_err());
        assert!(CorefGraph::build(vec![mention(0, "a"), mention(2, "b")]).is_err());
        let mut m = mention(0, "a");
        m.span_text.clear();
        assert!(CorefGraph::build(vec![m]).is_err());
    }

    #[test]
    fn normalized_adjacency_examples() {
        let single = graph(&["a"]);
        assert_eq!(normalized_adjacency(&single, &[]).unwrap().values(), &[1.0]);

        let two = graph(&["a", "a"]);
        let a = normalized_adjacency(&two, two.edges()).unwrap();
        for &v in a.values() {
            assert!((v - 0.5).abs() < 1e-15);
        }

        let path = graph(&["a", "b", "c"]);
        let a = normalized_adjacency(&path, &[(0, 1), (1, 2)]).unwrap();
        assert!((a.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((a.get(0, 1) - 0.4082).abs() < 1e-4);
        assert_eq!(a, a.transpose());
        assert!(normalized_adjacency(&path, &[(0, 0)]).is_err());
        assert!(normalized_adjacency(&path, &[(0, 7)]).is_err());
    }

    #[test]
    fn split_counts_for_200_edges() {
        // one chain of 20 (190 edges) plus one of 5 (10 edges), plus singletons
        let mut chains: Vec<String> = (0..20).map(|_| "big".to_string()).collect();
        chains.extend((0..5).map(|_| "small".to_string()));
        chains.extend((0..40).map(|i| format!("s{i}")));
        let refs: Vec<&str> = chains.iter().map(String::as_str).collect();
        let g = graph(&refs);
        assert_eq!(g.edges().len(), 200);
        let s = split_edges(&g, 0.05, 0.10, 3).unwrap();
        assert_eq!(
            (s.val_pos.len(), s.test_pos.len(), s.train_pos.len(), s.val_neg.len(), s.test_neg.len()),
            (10, 20, 170, 10, 20)
        );
        assert_eq!(s, split_edges(&g, 0.05, 0.10, 3).unwrap());
        assert_ne!(s, split_edges(&g, 0.05, 0.10, 4).unwrap());

        let all_train = split_edges(&g, 0.0, 0.0, 1).unwrap();
        assert_eq!(all_train.train_pos.len(), 200);
        assert!(all_train.val_pos.is_empty() && all_train.test_neg.is_empty());
    }

    #[test]
    fn split_reports_dense_graphs() {
        let g = graph(&["a", "a", "a", "b"]);
        // 6 pairs, 3 edges, 3 non-edges; asking 0.45 + 0.45 of 3 edges = 1 + 1 negatives is fine
        assert!(split_edges(&g, 0.45, 0.45, 0).is_ok());
        let full = graph(&["a", "a", "a"]);
        match split_edges(&full, 0.34, 0.34, 0) {
            Err(Error::TooDense { needed, available }) => assert_eq!((needed, available), (2, 0)),
            other => panic!("expected TooDense, got {other:?}"),
        }
        assert!(split_edges(&g, 0.5, 0.5, 0).is_err());
        assert!(split_edges(&graph(&["a", "b"]), 0.1, 0.1, 0).is_err());
    }

    #[test]
    fn subsample_sizes() {
        let mut chains: Vec<String> = (0..45).map(|_| "big".to_string()).collect();
        chains.extend((0..5).map(|_| "small".to_string()));
        chains.extend((0..60).map(|i| format!("s{i}")));
        let refs: Vec<&str> = chains.iter().map(String::as_str).collect();
        let g = graph(&refs);
        assert_eq!(g.edges().len(), 1000);
        let s = split_edges(&g, 0.05, 0.10, 9).unwrap();

        let small = subsample_training(&s, 0.05, 1).unwrap();
        assert_eq!(small.train_pos.len(), 50);
        assert_eq!((small.val_pos.clone(), small.test_neg.clone()), (s.val_pos.clone(), s.test_neg.clone()));
        let train: HashSet<_> = s.train_pos.iter().collect();
        assert!(small.train_pos.iter().all(|e| train.contains(e)));

        let same = subsample_training(&s, 0.85, 1).unwrap();
        assert_eq!(same, s);
        let capped = subsample_training(&s, 1.0, 1).unwrap();
        assert_eq!(capped.train_pos.len(), 850);
        assert!(subsample_training(&s, 0.0, 1).is_err());
        assert!(subsample_training(&s, 1.5, 1).is_err());
    }

    #[test]
    fn split_file_round_trip() {
        let g = graph(&["a", "a", "a", "b", "b", "c", "d", "e"]);
        let s = split_edges(&g, 0.25, 0.25, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.tsv");
        write_split(&path, &s).unwrap();
        assert_eq!(read_split(&path).unwrap(), s);
    }

    #[test]
    fn features_load_and_reject() {
        let g = graph(&["a", "a", "b"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.tsv");

        fs::write(&path, "2\t0.5\t1\n0\t1.0\t2.0\n1\t-1\t3e-2\n").unwrap();
        let f = load_features(&path, &g).unwrap();
        assert_eq!(f.kind, FeatureKind::External);
        assert_eq!(f.data.row(2), &[0.5, 1.0]);
        assert_eq!(f.data.row(1), &[-1.0, 0.03]);

        fs::write(&path, "0\t1\t2\n1\t1\n2\t1\t2\n").unwrap();
        assert!(matches!(load_features(&path, &g), Err(Error::Parse { line: 2, .. })));
        fs::write(&path, "0\t1\n1\tNaN\n2\t1\n").unwrap();
        assert!(matches!(load_features(&path, &g), Err(Error::Parse { line: 2, .. })));
        fs::write(&path, "0\t1\n1\t1\n").unwrap();
        assert!(load_features(&path, &g).is_err());

        let id = FeatureMatrix::identity(&g);
        assert_eq!(id.kind, FeatureKind::Identity);
        assert_eq!(id.data, DenseMatrix::identity(3));
    }

    #[test]
    fn corpus_ignores_extra_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(
            &path,
            "{\"id\":0,\"doc_id\":\"d\",\"span_text\":\"vergadering\",\"chain_id\":\"c1\",\"context\":\"x\",\"span_start\":0,\"span_end\":3}\n",
        )
        .unwrap();
        let ms = read_corpus(&path).unwrap();
        assert_eq!(ms[0].span_text, "vergadering");
        fs::write(&path, "{\"id\":0}\n").unwrap();
        assert!(matches!(read_corpus(&path), Err(Error::Parse { line: 1, .. })));
    }
}
