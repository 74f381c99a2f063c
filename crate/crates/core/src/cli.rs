//! Command-line driver behind the `gaecoref` binary.
//!
//! Every command writes into one run directory: its outputs, `config.txt`
//! (the effective settings, reusable with `--config`), `run_meta.json` and
//! `run.log`. Exit codes: 0 success, 1 usage error, 2 data or validation
//! error, 3 training divergence. Errors go to stderr prefixed `error:`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::analysis::{
    cosine_pairwise_baseline, run_ablation, tp_levenshtein_report, tune_cosine_threshold, AblationVariant,
};
use crate::error::{Error, Result};
use crate::gcn::ModelKind;
use crate::graph::{load_features, read_corpus, read_split, split_edges, write_split, CorefGraph, EdgeSplit, FeatureMatrix};
use crate::metrics::{evaluate_links, read_chains, write_chains, ScoreReport};
use crate::model::{predict_pairs, train, ModelConfig, TrainedModel};
use crate::synth::{generate, GenParams};

/// Environment variable naming the default root for run directories.
pub const OUT_ENV: &str = "GAECOREF_OUT";

#[derive(Parser, Debug)]
#[command(name = "gaecoref", version, about = "Event coreference as graph reconstruction with graph autoencoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus (JSONL) and its feature matrix (TSV).
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Mask validation and test edges and sample matching non-edges.
    #[command(args_override_self = true)]
    Split(SplitCmdArgs),
    /// Train a GAE or VGAE on the training edges of a split.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Score predicted links or a chain file against the gold chains.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Retrain on shrinking fractions of the edge set and tabulate CONLL.
    #[command(args_override_self = true)]
    Ablate(AblateArgs),
    /// Mean span edit distance of true-positive pairs per model.
    #[command(args_override_self = true)]
    Analyze(AnalyzeArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Split(_) => "split",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Ablate(_) => "ablate",
            Command::Analyze(_) => "analyze",
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct RunArgs {
    /// Run directory [default: $GAECOREF_OUT/<command>, else runs/<command>]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// File of `key = value` lines; flags given on the command line win
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Preset {
    Default,
    ConfoundRich,
}

#[derive(Args, Debug, Serialize)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    preset: Preset,
    /// Total mention count
    #[arg(long)]
    mentions: Option<usize>,
    /// Keep the raw chain-size draws instead of fixing the mention count
    #[arg(long)]
    raw_sizes: bool,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    chain_min: Option<usize>,
    #[arg(long)]
    chain_max: Option<usize>,
    /// Success probability of the geometric chain-size distribution
    #[arg(long)]
    chain_shape: Option<f64>,
    #[arg(long)]
    docs: Option<usize>,
    /// Feature dimension
    #[arg(long)]
    dim: Option<usize>,
    /// Feature noise η
    #[arg(long)]
    noise: Option<f64>,
    /// Weight of the surface-lemma direction in the features
    #[arg(long)]
    lexical_weight: Option<f64>,
    #[arg(long)]
    lemma_pool: Option<usize>,
    #[arg(long)]
    p_same_lemma: Option<f64>,
    #[arg(long)]
    p_confound: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

impl GenerateArgs {
    fn params(&self) -> GenParams {
        let mut p = match self.preset {
            Preset::Default => GenParams::default(),
            Preset::ConfoundRich => GenParams::confound_rich(),
        };
        if self.raw_sizes {
            p.n_mentions = None;
        } else if let Some(m) = self.mentions {
            p.n_mentions = Some(m);
        }
        macro_rules! set {
            ($($field:ident <- $arg:ident),*) => {$( if let Some(v) = self.$arg { p.$field = v; } )*};
        }
        set!(n_chains <- chains, chain_min <- chain_min, chain_max <- chain_max, chain_shape <- chain_shape,
             n_docs <- docs, dim <- dim, noise <- noise, lexical_weight <- lexical_weight,
             lemma_pool <- lemma_pool, p_same_lemma <- p_same_lemma, p_confound <- p_confound);
        p.seed = self.seed;
        p
    }
}

#[derive(Args, Debug, Serialize)]
struct FractionArgs {
    /// Fraction of edges masked for validation
    #[arg(long, default_value_t = 0.05)]
    val_frac: f64,
    /// Fraction of edges masked for testing
    #[arg(long, default_value_t = 0.10)]
    test_frac: f64,
}

#[derive(Args, Debug, Serialize)]
struct SplitCmdArgs {
    /// Mention corpus (JSONL)
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    fractions: FractionArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

/// Corpus, optional features and an optional precomputed split.
#[derive(Args, Debug, Serialize)]
struct DataArgs {
    /// Mention corpus (JSONL)
    #[arg(long)]
    corpus: PathBuf,
    /// Feature TSV; without it every mention gets a one-hot identity feature
    #[arg(long)]
    features: Option<PathBuf>,
    /// Split TSV; without it the edges are split with --val-frac/--test-frac
    #[arg(long)]
    split: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    fractions: FractionArgs,
}

#[derive(Args, Debug, Serialize)]
struct ModelArgs {
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 32)]
    latent: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    /// Dropout on the hidden layer during training
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// Decision threshold when it is not tuned on validation pairs
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Use --threshold as is instead of tuning it on validation pairs
    #[arg(long)]
    fixed_threshold: bool,
    /// Weight of the KL term for VGAE [default: 1/N]
    #[arg(long)]
    kl_weight: Option<f64>,
    /// Pin the VGAE log-sigma head to this value
    #[arg(long, allow_negative_numbers = true)]
    fixed_log_sigma: Option<f64>,
}

impl ModelArgs {
    fn config(&self, kind: ModelKind, seed: u64) -> ModelConfig {
        ModelConfig {
            kind,
            hidden: self.hidden,
            latent: self.latent,
            epochs: self.epochs,
            lr: self.lr,
            seed,
            dropout: self.dropout,
            threshold: self.threshold,
            tune_threshold: !self.fixed_threshold,
            fixed_log_sigma: self.fixed_log_sigma,
            kl_weight: self.kl_weight,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Model variant
    #[arg(long, default_value_t = ModelKind::Gae)]
    model: ModelKind,
    #[command(flatten)]
    #[serde(flatten)]
    hyper: ModelArgs,
    /// Seed for initialization, noise and (when splitting here) the split
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug, Serialize)]
#[command(group(ArgGroup::new("system").required(true).args(["model", "chains"])))]
struct EvalArgs {
    /// Mention corpus (JSONL) holding the gold chains
    #[arg(long)]
    corpus: PathBuf,
    /// Split TSV whose test pairs are scored (required with --model)
    #[arg(long)]
    split: Option<PathBuf>,
    /// Trained model JSON
    #[arg(long)]
    model: Option<PathBuf>,
    /// System chains (JSONL, one {"chain": [ids]} per line)
    #[arg(long)]
    chains: Option<PathBuf>,
    /// Override the model's decision threshold
    #[arg(long)]
    threshold: Option<f64>,
    /// Do not count validation positives as observed links
    #[arg(long)]
    exclude_val: bool,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug, Serialize)]
struct AblateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Training fractions, relative to the full edge set
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.15,0.25,0.35,0.45,0.55,0.65,0.75")]
    fractions: Vec<f64>,
    /// One run per seed in every cell; cells report the mean
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Model variants to ablate
    #[arg(long, value_delimiter = ',', default_value = "gae")]
    models: Vec<ModelKind>,
    /// Skip the identity-feature variants
    #[arg(long)]
    no_featureless: bool,
    #[command(flatten)]
    #[serde(flatten)]
    hyper: ModelArgs,
    /// Seed of the split when it is made here
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Worker threads for the grid [default: available cores]
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug, Serialize)]
struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Trained models as NAME=PATH (or PATH); without any, a GAE is trained here
    #[arg(long = "model", value_name = "NAME=PATH", value_delimiter = ',')]
    #[serde(rename = "model")]
    models: Vec<String>,
    #[command(flatten)]
    #[serde(flatten)]
    hyper: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

/// Runs the CLI on the process arguments and returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match inject_config(args) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {e}");
    match e {
        Error::Divergence { .. } => 3,
        _ => 2,
    }
}

/// Expands `--config FILE` into flags placed right after the subcommand, so
/// that flags typed on the command line come later and override them.
fn inject_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (k, a) in args.iter().enumerate() {
        let Some(s) = a.to_str() else { continue };
        if s == "--config" {
            path = args.get(k + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    if args.len() < 2 {
        return Ok(args);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let flags = config_flags(&path, &text)?;
    let mut out = Vec::with_capacity(args.len() + flags.len());
    out.extend_from_slice(&args[..2]);
    out.extend(flags);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

fn config_flags(path: &Path, text: &str) -> Result<Vec<OsString>> {
    let mut flags = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(path, k + 1, "expected `key = value`"));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::parse(path, k + 1, "empty key"));
        }
        match value {
            "true" => flags.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                flags.push(format!("--{key}").into());
                flags.push(value.into());
            }
        }
    }
    Ok(flags)
}

/// Log file of the current run; log lines go to stderr and, once a run
/// directory exists, to its `run.log` as well.
static RUN_LOG: Mutex<Option<File>> = Mutex::new(None);

struct Tee;

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        io::stderr().write_all(buf)?;
        if let Some(f) = RUN_LOG.lock().unwrap_or_else(|e| e.into_inner()).as_mut() {
            f.write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        if let Some(f) = RUN_LOG.lock().unwrap_or_else(|e| e.into_inner()).as_mut() {
            f.flush()?;
        }
        io::stderr().flush()
    }
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()))
        .target(env_logger::Target::Pipe(Box::new(Tee)))
        .try_init();
}

struct RunDir {
    path: PathBuf,
    command: &'static str,
    settings: Value,
    outputs: Vec<String>,
}

impl RunDir {
    fn create<S: Serialize>(command: &'static str, run: &RunArgs, settings: &S) -> Result<Self> {
        let path = match &run.out {
            Some(p) => p.clone(),
            None => std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs"))
                .join(command),
        };
        fs::create_dir_all(&path).map_err(|e| Error::io(&path, e))?;
        let log_path = path.join("run.log");
        let file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        *RUN_LOG.lock().unwrap_or_else(|e| e.into_inner()) = Some(file);

        let settings = serde_json::to_value(settings)?;
        let snapshot = path.join("config.txt");
        fs::write(&snapshot, config_snapshot(&settings)).map_err(|e| Error::io(&snapshot, e))?;
        info!("{command}: writing to {}", path.display());
        Ok(Self {
            path,
            command,
            settings,
            outputs: Vec::new(),
        })
    }

    /// Path of an output file, recorded in the run metadata.
    fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.path.join(name)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.output(name);
        fs::write(&p, contents).map_err(|e| Error::io(&p, e))
    }

    fn finish(self, extra: Value) -> Result<()> {
        let meta = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "settings": self.settings,
            "outputs": self.outputs,
            "summary": extra,
        });
        let p = self.path.join("run_meta.json");
        fs::write(&p, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| Error::io(&p, e))?;
        if let Some(mut f) = RUN_LOG.lock().unwrap_or_else(|e| e.into_inner()).take() {
            let _ = f.flush();
        }
        Ok(())
    }
}

fn config_snapshot(settings: &Value) -> String {
    let mut out = String::new();
    let Value::Object(map) = settings else { return out };
    for (key, v) in map {
        let text = match v {
            Value::Null => continue,
            Value::String(s) => s.clone(),
            Value::Array(items) => items.iter().map(scalar).collect::<Vec<_>>().join(","),
            other => scalar(other),
        };
        out.push_str(&format!("{key} = {text}\n"));
    }
    out
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn dispatch(command: Command) -> Result<()> {
    let name = command.name();
    match command {
        Command::Generate(a) => cmd_generate(name, &a),
        Command::Split(a) => cmd_split(name, &a),
        Command::Train(a) => cmd_train(name, &a),
        Command::Eval(a) => cmd_eval(name, &a),
        Command::Ablate(a) => cmd_ablate(name, &a),
        Command::Analyze(a) => cmd_analyze(name, &a),
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} {} does not exist", path.display())))
    }
}

fn load_graph(corpus: &Path) -> Result<CorefGraph> {
    let graph = CorefGraph::build(read_corpus(corpus)?)?;
    info!("{} mentions, {} gold edges", graph.len(), graph.edges().len());
    Ok(graph)
}

impl DataArgs {
    fn check(&self) -> Result<()> {
        require_file(&self.corpus, "corpus")?;
        if let Some(p) = &self.features {
            require_file(p, "feature file")?;
        }
        if let Some(p) = &self.split {
            require_file(p, "split file")?;
        }
        Ok(())
    }
}

struct Data {
    graph: CorefGraph,
    features: FeatureMatrix,
    split: EdgeSplit,
}

fn load_data(args: &DataArgs, split_seed: u64) -> Result<Data> {
    let graph = load_graph(&args.corpus)?;
    let features = match &args.features {
        Some(p) => load_features(p, &graph)?,
        None => FeatureMatrix::identity(&graph),
    };
    let split = match &args.split {
        Some(p) => read_split(p)?,
        None => split_edges(&graph, args.fractions.val_frac, args.fractions.test_frac, split_seed)?,
    };
    check_split(&graph, &split)?;
    info!(
        "split: {} train / {} val / {} test positives",
        split.train_pos.len(),
        split.val_pos.len(),
        split.test_pos.len()
    );
    Ok(Data { graph, features, split })
}

fn check_split(graph: &CorefGraph, split: &EdgeSplit) -> Result<()> {
    let n = graph.len();
    let all = split
        .train_pos
        .iter()
        .chain(&split.val_pos)
        .chain(&split.test_pos)
        .chain(&split.val_neg)
        .chain(&split.test_neg);
    if let Some(&(i, j)) = all.clone().find(|&&(i, j)| i >= n || j >= n) {
        return Err(Error::invalid(format!("split pair ({i}, {j}) out of range for {n} mentions")));
    }
    let positives = split.train_pos.iter().chain(&split.val_pos).chain(&split.test_pos);
    if let Some(&(i, j)) = positives.clone().find(|&&(i, j)| !graph.has_edge(i, j)) {
        return Err(Error::invalid(format!("split positive ({i}, {j}) is not a gold edge")));
    }
    Ok(())
}

fn cmd_generate(name: &'static str, a: &GenerateArgs) -> Result<()> {
    let params = a.params();
    params.validate()?;
    let mut run = RunDir::create(name, &a.run, a)?;
    let corpus = generate(&params)?;
    let chains = corpus
        .mentions
        .iter()
        .map(|m| m.chain_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    corpus.write(&run.output("corpus.jsonl"), &run.output("features.tsv"))?;
    info!("generated {} mentions in {chains} chains, {}-d features", corpus.mentions.len(), params.dim);
    run.finish(json!({ "params": params, "mentions": corpus.mentions.len(), "chains": chains }))
}

fn cmd_split(name: &'static str, a: &SplitCmdArgs) -> Result<()> {
    require_file(&a.corpus, "corpus")?;
    let mut run = RunDir::create(name, &a.run, a)?;
    let graph = load_graph(&a.corpus)?;
    let split = split_edges(&graph, a.fractions.val_frac, a.fractions.test_frac, a.seed)?;
    write_split(&run.output("split.tsv"), &split)?;
    info!(
        "{} train / {} val / {} test positives, {} val / {} test negatives",
        split.train_pos.len(),
        split.val_pos.len(),
        split.test_pos.len(),
        split.val_neg.len(),
        split.test_neg.len()
    );
    run.finish(json!({
        "train_pos": split.train_pos.len(),
        "val_pos": split.val_pos.len(),
        "test_pos": split.test_pos.len(),
        "val_neg": split.val_neg.len(),
        "test_neg": split.test_neg.len(),
    }))
}

fn history_tsv(model: &TrainedModel) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    let mut out = String::from("epoch\tloss\trecon\tkl\tval_ap\tval_auc\n");
    for h in &model.history {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            h.epoch,
            h.loss,
            h.recon,
            h.kl,
            opt(h.val_ap),
            opt(h.val_auc)
        ));
    }
    out
}

fn cmd_train(name: &'static str, a: &TrainArgs) -> Result<()> {
    let config = a.hyper.config(a.model, a.seed);
    config.validate()?;
    a.data.check()?;
    let mut run = RunDir::create(name, &a.run, a)?;
    let data = load_data(&a.data, a.seed)?;
    info!("training {} ({} epochs, {}-d input)", config.kind, config.epochs, data.features.dim());
    let model = train(&data.graph, &data.split, &data.features, &config)?;
    let last = model.history.last().expect("at least one epoch");
    info!(
        "final loss {:.4}, val AP {}, decision threshold {:.2}",
        last.loss,
        last.val_ap.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}")),
        model.decision_threshold
    );
    model.save(&run.output("model.json"))?;
    run.write("history.tsv", &history_tsv(&model))?;
    write_split(&run.output("split.tsv"), &data.split)?;
    run.finish(json!({
        "final_loss": last.loss,
        "final_val_ap": last.val_ap,
        "final_val_auc": last.val_auc,
        "decision_threshold": model.decision_threshold,
        "parameters": model.weights.parameter_count(),
    }))
}

fn cmd_eval(name: &'static str, a: &EvalArgs) -> Result<()> {
    require_file(&a.corpus, "corpus")?;
    for (p, what) in [(&a.split, "split file"), (&a.model, "model file"), (&a.chains, "chain file")] {
        if let Some(p) = p {
            require_file(p, what)?;
        }
    }
    if a.model.is_some() && a.split.is_none() {
        return Err(Error::invalid("--model needs --split to know the test pairs"));
    }
    let mut run = RunDir::create(name, &a.run, a)?;
    let graph = load_graph(&a.corpus)?;
    let gold = graph.gold_clustering();
    let mut summary = Map::new();
    let (report, chains) = if let Some(model_path) = &a.model {
        let split_path = a.split.as_ref().expect("checked above");
        let model = TrainedModel::load(model_path)?;
        let split = read_split(split_path)?;
        check_split(&graph, &split)?;
        if model.embedding.rows() != graph.len() {
            return Err(Error::invalid(format!(
                "model embeds {} mentions, corpus has {}",
                model.embedding.rows(),
                graph.len()
            )));
        }
        let threshold = a.threshold.unwrap_or(model.decision_threshold);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::invalid(format!("threshold must be in [0, 1], got {threshold}")));
        }
        let (pairs, _) = split.test_pairs();
        let scores = predict_pairs(&model, &pairs)?;
        let eval = evaluate_links(&graph, &split, &scores, threshold, !a.exclude_val)?;
        summary.insert("threshold".into(), json!(threshold));
        summary.insert("test_pairs".into(), json!(pairs.len()));
        (eval.report, eval.chains)
    } else {
        let chains_path = a.chains.as_ref().expect("clap enforces --model or --chains");
        let sys = read_chains(chains_path, graph.len())?;
        (ScoreReport::chains_only(&gold, &sys)?, sys)
    };
    info!("\n{report}");
    let mut scores = serde_json::to_value(&report)?;
    if let Value::Object(m) = &mut scores {
        m.extend(summary);
    }
    run.write("scores.json", &(serde_json::to_string_pretty(&scores)? + "\n"))?;
    write_chains(&run.output("chains.jsonl"), &chains)?;
    run.finish(json!({ "conll": report.conll, "ap": report.ap, "auc": report.auc }))
}

fn cmd_ablate(name: &'static str, a: &AblateArgs) -> Result<()> {
    if a.models.is_empty() {
        return Err(Error::invalid("--models is empty"));
    }
    for &kind in &a.models {
        a.hyper.config(kind, 0).validate()?;
    }
    a.data.check()?;
    let mut run = RunDir::create(name, &a.run, a)?;
    let data = load_data(&a.data, a.split_seed)?;
    let identity = FeatureMatrix::identity(&data.graph);
    let mut variants = Vec::new();
    for &kind in &a.models {
        if a.data.features.is_some() {
            variants.push(AblationVariant {
                name: format!("{kind}-feat"),
                features: data.features.clone(),
                config: a.hyper.config(kind, 0),
            });
        }
        if !a.no_featureless {
            variants.push(AblationVariant {
                name: format!("{kind}-nofeat"),
                features: identity.clone(),
                config: a.hyper.config(kind, 0),
            });
        }
    }
    if variants.is_empty() {
        return Err(Error::invalid("no variants: --no-featureless needs --features"));
    }
    let threads = a
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    info!(
        "{} variants x {} fractions x {} seeds on {threads} threads",
        variants.len(),
        a.fractions.len(),
        a.seeds.len()
    );
    let result = run_ablation(&data.graph, &data.split, &variants, &a.fractions, &a.seeds, threads)?;
    let failed = result.cells.iter().filter(|c| c.outcome.is_err()).count();
    if failed > 0 {
        warn!("{failed} of {} cells failed; see ablation_cells.tsv", result.cells.len());
    }
    info!("\n{}", result.to_tsv());
    run.write("ablation.tsv", &result.to_tsv())?;
    run.write("ablation_cells.tsv", &result.to_long_tsv())?;
    run.write("ablation.svg", &result.to_svg())?;
    run.finish(json!({ "cells": result.cells.len(), "failed": failed }))
}

fn parse_model_spec(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let name = path
                .file_stem()
                .map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (name, path)
        }
    }
}

fn cmd_analyze(name: &'static str, a: &AnalyzeArgs) -> Result<()> {
    a.hyper.config(ModelKind::Gae, a.seed).validate()?;
    a.data.check()?;
    for spec in &a.models {
        require_file(&parse_model_spec(spec).1, "model file")?;
    }
    let mut run = RunDir::create(name, &a.run, a)?;
    let data = load_data(&a.data, a.seed)?;
    let (pairs, gold) = data.split.test_pairs();

    let mut predictions: Vec<(String, Vec<bool>)> = Vec::new();
    if a.models.is_empty() {
        let config = a.hyper.config(ModelKind::Gae, a.seed);
        let label = if a.data.features.is_some() { "gae-feat" } else { "gae-nofeat" };
        info!("training {label}");
        let model = train(&data.graph, &data.split, &data.features, &config)?;
        let scores = predict_pairs(&model, &pairs)?;
        predictions.push((label.into(), scores.iter().map(|&s| s >= model.decision_threshold).collect()));
    }
    for spec in &a.models {
        let (label, path) = parse_model_spec(spec);
        let model = TrainedModel::load(&path)?;
        if model.embedding.rows() != data.graph.len() {
            return Err(Error::invalid(format!(
                "model {label} embeds {} mentions, corpus has {}",
                model.embedding.rows(),
                data.graph.len()
            )));
        }
        let scores = predict_pairs(&model, &pairs)?;
        predictions.push((label, scores.iter().map(|&s| s >= model.decision_threshold).collect()));
    }
    let mut cosine_threshold = None;
    if a.data.features.is_some() {
        let (val_pairs, val_gold) = data.split.val_pairs();
        let t = tune_cosine_threshold(&data.features.data, &val_pairs, &val_gold)?;
        info!("cosine baseline threshold {t:.2} (tuned on validation pairs)");
        let decisions = cosine_pairwise_baseline(&data.features.data, &pairs, t)?
            .into_iter()
            .map(|(_, d, _)| d)
            .collect();
        predictions.push(("cosine".into(), decisions));
        cosine_threshold = Some(t);
    }
    let report = tp_levenshtein_report(&data.graph, &pairs, &gold, &predictions)?;
    info!("\n{}", report.to_tsv());
    run.write("tp_levenshtein.tsv", &report.to_tsv())?;
    run.finish(json!({ "cosine_threshold": cosine_threshold, "models": report.entries.len() }))
}
