use gaecoref::graph::split_edges;
use gaecoref::model::{predict_pairs, train};
use gaecoref::synth::{generate, GenParams};
use gaecoref::{CorefGraph, EdgeSplit, Error, FeatureMatrix, ModelConfig, ModelKind, TrainedModel};

fn small_corpus(seed: u64) -> (CorefGraph, FeatureMatrix, EdgeSplit) {
    let params = GenParams {
        n_mentions: Some(120),
        n_chains: 15,
        n_docs: 12,
        dim: 16,
        ..GenParams::default().with_seed(seed)
    };
    let corpus = generate(&params).unwrap();
    let graph = CorefGraph::build(corpus.mentions).unwrap();
    let split = split_edges(&graph, 0.05, 0.10, seed).unwrap();
    (graph, FeatureMatrix::external(corpus.features), split)
}

fn quick(kind: ModelKind, seed: u64) -> ModelConfig {
    ModelConfig {
        hidden: 16,
        latent: 8,
        epochs: 40,
        ..ModelConfig::new(kind, seed)
    }
}

#[test]
fn reruns_are_bit_identical() {
    let (graph, x, split) = small_corpus(1);
    for kind in [ModelKind::Gae, ModelKind::Vgae] {
        let config = ModelConfig { dropout: 0.2, ..quick(kind, 5) };
        let a = train(&graph, &split, &x, &config).unwrap();
        let b = train(&graph, &split, &x, &config).unwrap();
        assert_eq!(a, b, "{kind}");
        let c = train(&graph, &split, &x, &quick(kind, 6)).unwrap();
        assert_ne!(a.history, c.history);
    }
}

#[test]
fn save_load_predicts_identically() {
    let (graph, x, split) = small_corpus(2);
    let dir = tempfile::tempdir().unwrap();
    let (pairs, _) = split.test_pairs();
    for kind in [ModelKind::Gae, ModelKind::Vgae] {
        let model = train(&graph, &split, &x, &quick(kind, 3)).unwrap();
        let path = dir.path().join(format!("{kind}.json"));
        model.save(&path).unwrap();
        let loaded = TrainedModel::load(&path).unwrap();
        assert_eq!(loaded, model);
        let before = predict_pairs(&model, &pairs).unwrap();
        let after = predict_pairs(&loaded, &pairs).unwrap();
        assert!(before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn model_file_rejects_wrong_version() {
    let (graph, x, split) = small_corpus(2);
    let model = train(&graph, &split, &x, &ModelConfig { epochs: 2, ..quick(ModelKind::Gae, 0) }).unwrap();
    let text = model.to_json().unwrap().replace("\"format_version\":1", "\"format_version\":9");
    assert!(TrainedModel::from_json(&text).is_err());
}

#[test]
fn kl_is_non_negative_every_epoch() {
    let (graph, x, split) = small_corpus(3);
    let model = train(&graph, &split, &x, &quick(ModelKind::Vgae, 1)).unwrap();
    assert!(model.history.iter().all(|h| h.kl >= 0.0));
    let gae = train(&graph, &split, &x, &quick(ModelKind::Gae, 1)).unwrap();
    assert!(gae.history.iter().all(|h| h.kl == 0.0 && h.loss == h.recon));
}

#[test]
fn early_loss_mostly_decreases() {
    let corpus = generate(&GenParams::default()).unwrap();
    let graph = CorefGraph::build(corpus.mentions).unwrap();
    let split = split_edges(&graph, 0.05, 0.10, 0).unwrap();
    let x = FeatureMatrix::external(corpus.features);
    let epochs = 11;
    let gae = train(&graph, &split, &x, &ModelConfig { epochs, ..ModelConfig::new(ModelKind::Gae, 0) }).unwrap();
    let steps = gae.history.windows(2).filter(|w| w[1].loss <= w[0].loss).count();
    assert!(steps >= 8, "gae: {steps}/10 non-increasing steps");
    // single-sample VGAE losses are noisy; only the net trend is asserted
    let vgae = train(&graph, &split, &x, &ModelConfig { epochs, ..ModelConfig::new(ModelKind::Vgae, 0) }).unwrap();
    assert!(vgae.history[10].loss < vgae.history[0].loss);
}

#[test]
fn default_corpus_reaches_high_validation_ap() {
    let corpus = generate(&GenParams::default()).unwrap();
    let graph = CorefGraph::build(corpus.mentions).unwrap();
    let split = split_edges(&graph, 0.05, 0.10, 0).unwrap();
    let x = FeatureMatrix::external(corpus.features);
    let model = train(&graph, &split, &x, &ModelConfig::default()).unwrap();
    let ap = model.history.last().unwrap().val_ap.unwrap();
    assert!(ap >= 0.90, "val AP {ap}");
}

#[test]
fn featureless_training_runs() {
    let (graph, _, split) = small_corpus(4);
    let x = FeatureMatrix::identity(&graph);
    let model = train(&graph, &split, &x, &quick(ModelKind::Gae, 0)).unwrap();
    assert_eq!(model.weights.w0.rows(), graph.len());
    assert!(model.embedding.is_finite());
}

#[test]
fn threshold_is_tuned_or_fixed() {
    let (graph, x, split) = small_corpus(5);
    let tuned = train(&graph, &split, &x, &quick(ModelKind::Gae, 0)).unwrap();
    assert!((0.0..=1.0).contains(&tuned.decision_threshold));
    let fixed = ModelConfig {
        tune_threshold: false,
        threshold: 0.37,
        ..quick(ModelKind::Gae, 0)
    };
    assert_eq!(train(&graph, &split, &x, &fixed).unwrap().decision_threshold, 0.37);
}

#[test]
fn exploding_learning_rate_reports_divergence() {
    let (graph, x, split) = small_corpus(6);
    let config = ModelConfig { lr: 1e300, epochs: 20, ..quick(ModelKind::Gae, 0) };
    match train(&graph, &split, &x, &config) {
        Err(Error::Divergence { epoch, .. }) => assert!(epoch >= 1),
        other => panic!("expected divergence, got {:?}", other.map(|m| m.history.len())),
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let (graph, x, split) = small_corpus(7);
    let mut empty = split.clone();
    empty.train_pos.clear();
    assert!(train(&graph, &empty, &x, &quick(ModelKind::Gae, 0)).is_err());
    let bad = ModelConfig { fixed_log_sigma: Some(-10.0), ..quick(ModelKind::Gae, 0) };
    assert!(train(&graph, &split, &x, &bad).is_err());
    let wrong_rows = FeatureMatrix::external(gaecoref::DenseMatrix::zeros(3, 4));
    assert!(train(&graph, &split, &wrong_rows, &quick(ModelKind::Gae, 0)).is_err());
}
