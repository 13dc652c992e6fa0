use layoutgnn::corpus::make_synthetic_corpus;
use layoutgnn::featstore::{synth_embeddings, Modality};
use layoutgnn::frameworks::{init_model, FrameworkSpec};
use layoutgnn::gnn::GnnKind;
use layoutgnn::trainer::{
    class_counts, class_weights, evaluate, train_fold, ClassWeightMode, Dataset, PreparedPage, TrainConfig,
};

fn dataset(docs: usize, signal: f64) -> Dataset {
    let corpus = make_synthetic_corpus(21, docs, 2, 10);
    let t = synth_embeddings(&corpus, Modality::Text, 16, 21, signal);
    let v = synth_embeddings(&corpus, Modality::Vision, 8, 21, signal);
    let spec = FrameworkSpec::dual(GnnKind::Sage, GnnKind::Sage);
    Dataset::prepare(&corpus, "SYNTH", spec.graph, spec.kind, Some(&t), Some(&v)).unwrap()
}

fn spec() -> FrameworkSpec {
    FrameworkSpec::dual(GnnKind::Sage, GnnKind::Sage).with_widths(2, 32, 16)
}

fn short(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, ..TrainConfig::default() }
}

#[test]
fn training_is_deterministic() {
    let data = dataset(6, 0.5);
    let pages: Vec<&PreparedPage> = data.docs.values().flatten().collect();
    let weights = class_weights(class_counts(pages.iter().copied()), ClassWeightMode::InverseFrequency);
    let mut runs = Vec::new();
    for _ in 0..2 {
        let mut model = init_model(&spec(), data.dims, 5).unwrap();
        let report = train_fold(&mut model, &pages, &short(5), 4, &weights, 9).unwrap();
        runs.push((model.checkpoint(), report));
    }
    assert_eq!(runs[0], runs[1]);
    let mut other = init_model(&spec(), data.dims, 5).unwrap();
    train_fold(&mut other, &pages, &short(5), 4, &weights, 10).unwrap();
    assert_ne!(other.checkpoint(), runs[0].0);
}

#[test]
fn separable_pages_are_fit() {
    // 10 documents x 2 pages, strongly separated classes
    let data = dataset(10, 3.0);
    let pages: Vec<&PreparedPage> = data.docs.values().flatten().collect();
    assert_eq!(pages.len(), 20);
    let weights = class_weights(class_counts(pages.iter().copied()), ClassWeightMode::InverseFrequency);
    let mut model = init_model(&spec(), data.dims, 1).unwrap();
    let report = train_fold(&mut model, &pages, &TrainConfig::default(), 16, &weights, 2).unwrap();
    let (_, metrics) = evaluate(&mut model, &pages).unwrap();
    assert!(metrics.overall >= 0.99, "training accuracy {}", metrics.overall);
    let trace = &report.loss_trace;
    let head: f64 = trace[..10].iter().sum::<f64>() / 10.0;
    let tail: f64 = trace[trace.len() - 10..].iter().sum::<f64>() / 10.0;
    assert!(tail < head, "loss {head} -> {tail}");
}

#[test]
fn unsupervised_pages_leave_parameters_untouched() {
    let data = dataset(3, 0.5);
    let mut pages: Vec<PreparedPage> = data.docs.values().flatten().cloned().collect();
    for p in &mut pages {
        p.mask.iter_mut().for_each(|m| *m = false);
    }
    let refs: Vec<&PreparedPage> = pages.iter().collect();
    let mut model = init_model(&spec(), data.dims, 4).unwrap();
    let before = model.checkpoint();
    let report = train_fold(&mut model, &refs, &short(3), 2, &[1.0; 4], 0).unwrap();
    assert_eq!(model.checkpoint(), before);
    assert_eq!(report.skipped_batches, 3 * 3);
    assert_eq!(report.skipped_pages, 3 * pages.len());
    assert!(report.loss_trace.iter().all(|l| l.is_nan()));
}

#[test]
fn predictions_recount_to_fold_metrics() {
    let data = dataset(5, 0.3);
    let pages: Vec<&PreparedPage> = data.docs.values().flatten().collect();
    let mut model = init_model(&spec(), data.dims, 8).unwrap();
    train_fold(&mut model, &pages, &short(3), 4, &[1.0; 4], 1).unwrap();
    let (preds, metrics) = evaluate(&mut model, &pages).unwrap();
    let supervised: usize = pages.iter().map(|p| p.supervised()).sum();
    assert_eq!(preds.len(), supervised);
    let hits = preds.iter().filter(|p| p.true_label == p.pred_label).count();
    assert_eq!(metrics.overall, hits as f64 / preds.len() as f64);
    for (c, name) in ["identifier", "title", "summary", "body"].iter().enumerate() {
        let of_c: Vec<_> = preds.iter().filter(|p| p.true_label == *name).collect();
        assert_eq!(metrics.support[c], of_c.len(), "{name}");
    }
}
