//! The experimental protocol: document-level 5-fold splits, class weights,
//! page-batched SGD training, evaluation and the per-fold run matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, Document, NUM_CLASSES};
use crate::featstore::{EmbeddingTable, FeatError, Modality};
use crate::frameworks::{init_model, predict, FrameworkError, FrameworkKind, FrameworkSpec, InputDims, ModelState};
use crate::gnn::GnnKind;
use crate::graphbuild::{GraphKind, PageOperators, DEFAULT_K};
use crate::metrics::{fold_metrics, FoldMetrics, MetricsError, ResultRow};
use crate::nncore::{sgd_step, weighted_ce_sum, Mode, NnError};
use crate::seed;

pub const NUM_FOLDS: usize = 5;
pub const DEFAULT_EPOCHS: usize = 350;
pub const DEFAULT_LR: f64 = 1e-3;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_BATCH_PAGES: usize = 16;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("source {source_id} has {docs} documents, need at least {NUM_FOLDS} for {NUM_FOLDS}-fold splits")]
    Fold { source_id: String, docs: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Feat(#[from] FeatError),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_doc_ids: Vec<String>,
    pub test_doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub source_id: String,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Shuffle the source's documents with `seed` and cut them into five
/// contiguous test folds; the first `n mod 5` folds get one extra document.
/// The result does not depend on the order of `documents`.
pub fn make_splits(documents: &[Document], source_id: &str, split_seed: u64) -> Result<SplitPlan, TrainError> {
    let mut ids: Vec<String> =
        documents.iter().filter(|d| d.source_id == source_id).map(|d| d.doc_id.clone()).collect();
    ids.sort();
    ids.dedup();
    if ids.len() < NUM_FOLDS {
        return Err(TrainError::Fold { source_id: source_id.to_owned(), docs: ids.len() });
    }
    ids.shuffle(&mut seed::rng(seed::derive(split_seed, source_id)));
    let (base, extra) = (ids.len() / NUM_FOLDS, ids.len() % NUM_FOLDS);
    let mut folds = Vec::with_capacity(NUM_FOLDS);
    let mut start = 0;
    for f in 0..NUM_FOLDS {
        let len = base + usize::from(f < extra);
        let test = ids[start..start + len].to_vec();
        let train = ids[..start].iter().chain(&ids[start + len..]).cloned().collect();
        folds.push(Fold { train_doc_ids: train, test_doc_ids: test });
        start += len;
    }
    Ok(SplitPlan { source_id: source_id.to_owned(), seed: split_seed, folds })
}

// ---------------------------------------------------------------------------
// Class weights
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeightMode {
    #[default]
    InverseFrequency,
    Uniform,
}

/// InverseFrequency: `w_c ∝ 1/count_c`, rescaled so the weights average 1.
/// If some class has no examples every count is incremented by one first.
pub fn class_weights(counts: [usize; NUM_CLASSES], mode: ClassWeightMode) -> [f64; NUM_CLASSES] {
    match mode {
        ClassWeightMode::Uniform => [1.0; NUM_CLASSES],
        ClassWeightMode::InverseFrequency => {
            let smooth = usize::from(counts.contains(&0));
            let inv = counts.map(|c| 1.0 / (c + smooth) as f64);
            let mean = inv.iter().sum::<f64>() / NUM_CLASSES as f64;
            inv.map(|w| w / mean)
        }
    }
}

pub fn class_counts<'a>(pages: impl IntoIterator<Item = &'a PreparedPage>) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    for p in pages {
        for (&y, &m) in p.labels.iter().zip(&p.mask) {
            if m {
                counts[y] += 1;
            }
        }
    }
    counts
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub dropout: f64,
    /// Pages per optimizer step unless the source has an override.
    pub batch_pages: usize,
    #[serde(default)]
    pub batch_overrides: BTreeMap<String, usize>,
    pub class_weight_mode: ClassWeightMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            lr: DEFAULT_LR,
            momentum: DEFAULT_MOMENTUM,
            dropout: crate::frameworks::DEFAULT_DROPOUT,
            batch_pages: DEFAULT_BATCH_PAGES,
            batch_overrides: BTreeMap::new(),
            class_weight_mode: ClassWeightMode::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_owned()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.batch_pages == 0 || self.batch_overrides.values().any(|&b| b == 0) {
            return bad("batch_pages must be positive");
        }
        Ok(())
    }

    pub fn batch_pages_for(&self, source_id: &str) -> usize {
        self.batch_overrides.get(source_id).copied().unwrap_or(self.batch_pages)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    pub init: u64,
    pub dropout: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { split: 0, init: 1, dropout: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameworkName {
    Single,
    Concat,
    Dual,
}

/// Batch size as a single number or a per-source table with an optional
/// `"default"` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchPages {
    Fixed(usize),
    PerSource(BTreeMap<String, usize>),
}

/// One run of the protocol, as read from a config JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source_id: String,
    pub framework: FrameworkName,
    /// Modality of the `single` framework.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    pub backbone_text: GnnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backbone_vision: Option<GnnKind>,
    #[serde(default = "default_graph")]
    pub graph: GraphKind,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_head_hidden")]
    pub head_hidden: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "default_batch")]
    pub batch_pages: BatchPages,
    #[serde(default)]
    pub class_weight_mode: ClassWeightMode,
    #[serde(default)]
    pub seeds: Seeds,
    /// Data paths, resolved relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_embeddings: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vision_embeddings: Option<PathBuf>,
}

fn default_graph() -> GraphKind {
    GraphKind::KClosest { k: DEFAULT_K }
}
fn default_depth() -> usize {
    crate::frameworks::DEFAULT_DEPTH
}
fn default_hidden() -> usize {
    crate::frameworks::DEFAULT_HIDDEN
}
fn default_head_hidden() -> usize {
    crate::frameworks::DEFAULT_HEAD_HIDDEN
}
fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}
fn default_lr() -> f64 {
    DEFAULT_LR
}
fn default_momentum() -> f64 {
    DEFAULT_MOMENTUM
}
fn default_dropout() -> f64 {
    crate::frameworks::DEFAULT_DROPOUT
}
fn default_batch() -> BatchPages {
    BatchPages::Fixed(DEFAULT_BATCH_PAGES)
}

impl RunConfig {
    /// A config with every protocol default for `spec` on `source_id`.
    pub fn new(source_id: &str, spec: &FrameworkSpec) -> Self {
        let (framework, modality) = match spec.kind {
            FrameworkKind::Single(m) => (FrameworkName::Single, Some(m)),
            FrameworkKind::Concat => (FrameworkName::Concat, None),
            FrameworkKind::Dual => (FrameworkName::Dual, None),
        };
        Self {
            source_id: source_id.to_owned(),
            framework,
            modality,
            backbone_text: spec.backbone_text,
            backbone_vision: spec.backbone_vision,
            graph: spec.graph,
            depth: spec.depth,
            hidden: spec.hidden,
            head_hidden: spec.head_hidden,
            epochs: DEFAULT_EPOCHS,
            lr: DEFAULT_LR,
            momentum: DEFAULT_MOMENTUM,
            dropout: crate::frameworks::DEFAULT_DROPOUT,
            batch_pages: default_batch(),
            class_weight_mode: ClassWeightMode::default(),
            seeds: Seeds::default(),
            manifest: None,
            text_embeddings: None,
            vision_embeddings: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        serde_json::from_str(text).map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes") + "\n"
    }

    pub fn framework_spec(&self) -> Result<FrameworkSpec, TrainError> {
        let kind = match (self.framework, self.modality) {
            (FrameworkName::Single, Some(m)) => FrameworkKind::Single(m),
            (FrameworkName::Single, None) => FrameworkKind::Single(Modality::Text),
            (FrameworkName::Concat, _) => FrameworkKind::Concat,
            (FrameworkName::Dual, _) => FrameworkKind::Dual,
        };
        if kind == FrameworkKind::Dual && self.backbone_vision.is_none() {
            return Err(TrainError::Config("dual framework needs backbone_vision".into()));
        }
        let spec = FrameworkSpec {
            backbone_vision: self.backbone_vision,
            ..FrameworkSpec::new(kind, self.backbone_text).with_graph(self.graph).with_widths(self.depth, self.hidden, self.head_hidden)
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn train_config(&self) -> TrainConfig {
        let (batch_pages, batch_overrides) = match &self.batch_pages {
            BatchPages::Fixed(b) => (*b, BTreeMap::new()),
            BatchPages::PerSource(table) => {
                let default = table.get("default").copied().unwrap_or(DEFAULT_BATCH_PAGES);
                let overrides = table.iter().filter(|(k, _)| *k != "default").map(|(k, v)| (k.clone(), *v)).collect();
                (default, overrides)
            }
        };
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            momentum: self.momentum,
            dropout: self.dropout,
            batch_pages,
            batch_overrides,
            class_weight_mode: self.class_weight_mode,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.framework_spec()?;
        self.train_config().validate()
    }
}

// ---------------------------------------------------------------------------
// Prepared data
// ---------------------------------------------------------------------------

/// One page with its graph operators, features and supervision.
#[derive(Debug, Clone)]
pub struct PreparedPage {
    pub doc_id: String,
    pub page_index: usize,
    pub object_ids: Vec<String>,
    pub ops: PageOperators,
    pub x_text: Option<crate::nncore::Matrix>,
    pub x_vision: Option<crate::nncore::Matrix>,
    /// Class index per node (0 for unsupervised nodes).
    pub labels: Vec<usize>,
    /// True for text-class nodes.
    pub mask: Vec<bool>,
}

impl PreparedPage {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn supervised(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Pages of one source, grouped by document.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub source_id: String,
    pub dims: InputDims,
    pub docs: BTreeMap<String, Vec<PreparedPage>>,
}

impl Dataset {
    /// Build graphs of `graph` kind and gather the features `kind` needs for
    /// every page of `source_id`.
    pub fn prepare(
        documents: &[Document],
        source_id: &str,
        graph: GraphKind,
        kind: FrameworkKind,
        text: Option<&EmbeddingTable>,
        vision: Option<&EmbeddingTable>,
    ) -> Result<Self, TrainError> {
        let need = |m: Modality, t: Option<&EmbeddingTable>| -> Result<Option<EmbeddingTable>, TrainError> {
            if !kind.uses(m) {
                return Ok(None);
            }
            let table = t.ok_or(FrameworkError::MissingFeatures(m))?;
            if table.modality() != m {
                return Err(FeatError::ModalityMismatch { expected: m, found: table.modality() }.into());
            }
            Ok(Some(table.clone()))
        };
        let (text, vision) = (need(Modality::Text, text)?, need(Modality::Vision, vision)?);
        let mut docs = BTreeMap::new();
        for d in documents.iter().filter(|d| d.source_id == source_id) {
            let mut pages = Vec::with_capacity(d.pages.len());
            for p in &d.pages {
                let g = graph.build(p);
                let labels: Vec<Option<usize>> = p.labels();
                pages.push(PreparedPage {
                    doc_id: d.doc_id.clone(),
                    page_index: p.page_index,
                    object_ids: p.objects.iter().map(|o| o.object_id.clone()).collect(),
                    ops: PageOperators::new(&g),
                    x_text: text.as_ref().map(|t| t.page_matrix(p)).transpose()?,
                    x_vision: vision.as_ref().map(|t| t.page_matrix(p)).transpose()?,
                    mask: labels.iter().map(Option::is_some).collect(),
                    labels: labels.iter().map(|l| l.unwrap_or(0)).collect(),
                });
            }
            docs.insert(d.doc_id.clone(), pages);
        }
        let dims = InputDims { text: text.as_ref().map(|t| t.dim()), vision: vision.as_ref().map(|t| t.dim()) };
        Ok(Self { source_id: source_id.to_owned(), dims, docs })
    }

    pub fn pages_of<'a>(&'a self, doc_ids: &'a [String]) -> impl Iterator<Item = &'a PreparedPage> + 'a {
        doc_ids.iter().filter_map(|id| self.docs.get(id)).flatten()
    }
}

// ---------------------------------------------------------------------------
// Training and evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Weighted mean training loss per epoch.
    pub loss_trace: Vec<f64>,
    /// Batches in which no page had a supervised node.
    pub skipped_batches: usize,
    /// Page visits skipped because the page had fewer than two nodes
    /// (batch statistics are undefined) or no supervised node.
    pub skipped_pages: usize,
}

/// Train `model` in place on `pages`.
///
/// Each epoch shuffles the pages and walks them in batches of
/// `batch_pages`; per batch, the unnormalized weighted cross-entropy
/// gradients of all pages are summed, divided by the batch's total applied
/// weight, and one SGD step is taken.
pub fn train_fold(
    model: &mut ModelState,
    pages: &[&PreparedPage],
    config: &TrainConfig,
    batch_pages: usize,
    weights: &[f64; NUM_CLASSES],
    dropout_seed: u64,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    model.dropout = config.dropout;
    let mut shuffle_rng = seed::rng(seed::derive(dropout_seed, "shuffle"));
    let mut dropout_rng = seed::rng(seed::derive(dropout_seed, "dropout"));
    let mut order: Vec<usize> = (0..pages.len()).collect();
    let mut report = TrainReport::default();
    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut epoch_loss, mut epoch_weight) = (0.0, 0.0);
        for batch in order.chunks(batch_pages) {
            let mut batch_weight = 0.0;
            for &i in batch {
                let page = pages[i];
                if page.n() < 2 || page.supervised() == 0 {
                    report.skipped_pages += 1;
                    continue;
                }
                let (logits, trace) =
                    model.forward_page(&page.ops, page.x_text.as_ref(), page.x_vision.as_ref(), Mode::Train, &mut dropout_rng)?;
                let (loss, w, dlogits) = weighted_ce_sum(&logits, &page.labels, weights, &page.mask)?;
                model.backward_page(&page.ops, &trace, &dlogits)?;
                epoch_loss += loss;
                epoch_weight += w;
                batch_weight += w;
            }
            if batch_weight > 0.0 {
                model.store.scale_grads(1.0 / batch_weight);
                sgd_step(&mut model.store, config.lr, config.momentum);
            } else {
                model.store.zero_grad();
                report.skipped_batches += 1;
            }
        }
        report.loss_trace.push(if epoch_weight > 0.0 { epoch_loss / epoch_weight } else { f64::NAN });
    }
    Ok(report)
}

/// One supervised node's outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub page_index: usize,
    pub object_id: String,
    pub true_label: String,
    pub pred_label: String,
}

fn class_name(i: usize) -> String {
    Category::from_class_index(i).map(|c| c.name().to_owned()).unwrap_or_default()
}

/// Eval-mode predictions for every supervised node, with the fold metrics
/// computed from them.
pub fn evaluate(model: &mut ModelState, pages: &[&PreparedPage]) -> Result<(Vec<Prediction>, FoldMetrics), TrainError> {
    let mut rng = seed::rng(0);
    let mut rows = Vec::new();
    let (mut preds, mut truths) = (Vec::new(), Vec::new());
    for page in pages {
        let (logits, _) = model.forward_page(&page.ops, page.x_text.as_ref(), page.x_vision.as_ref(), Mode::Eval, &mut rng)?;
        for (v, p) in predict(&logits).into_iter().enumerate().filter(|&(v, _)| page.mask[v]) {
            let t = page.labels[v];
            rows.push(Prediction {
                doc_id: page.doc_id.clone(),
                page_index: page.page_index,
                object_id: page.object_ids[v].clone(),
                true_label: class_name(t),
                pred_label: class_name(p),
            });
            preds.push(p);
            truths.push(t);
        }
    }
    let metrics = fold_metrics(&preds, &truths)?;
    Ok((rows, metrics))
}

pub fn predictions_to_csv(rows: &[Prediction]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["doc_id", "page_index", "object_id", "true_label", "pred_label"]).expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is UTF-8")
}

// ---------------------------------------------------------------------------
// Run matrix
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub metrics: FoldMetrics,
    pub predictions: Vec<Prediction>,
    pub report: TrainReport,
    pub checkpoint: Vec<u8>,
    pub weights: [f64; NUM_CLASSES],
}

impl FoldOutcome {
    pub fn result_row(&self, config: &RunConfig, spec: &FrameworkSpec) -> ResultRow {
        ResultRow {
            source: config.source_id.clone(),
            framework: spec.kind.label().to_owned(),
            backbone_text: spec.backbone_text.name().to_owned(),
            backbone_vision: match spec.kind {
                FrameworkKind::Dual | FrameworkKind::Single(Modality::Vision) => {
                    spec.backbone_vision.unwrap_or(spec.backbone_text).name().to_owned()
                }
                _ => String::new(),
            },
            graph_kind: spec.graph.label(),
            fold: self.fold,
            metrics: self.metrics.clone(),
        }
    }
}

/// Train and evaluate one fold. The initialization and dropout streams are
/// derived from the run seeds and the fold index.
pub fn run_fold(config: &RunConfig, data: &Dataset, plan: &SplitPlan, fold: usize) -> Result<FoldOutcome, TrainError> {
    let spec = config.framework_spec()?;
    let train_cfg = config.train_config();
    let f = &plan.folds[fold];
    let train: Vec<&PreparedPage> = data.pages_of(&f.train_doc_ids).collect();
    let test: Vec<&PreparedPage> = data.pages_of(&f.test_doc_ids).collect();
    let weights = class_weights(class_counts(train.iter().copied()), train_cfg.class_weight_mode);
    let mut model = init_model(&spec, data.dims, seed::derive_indexed(config.seeds.init, "fold-init", fold as u64))?;
    let report = train_fold(
        &mut model,
        &train,
        &train_cfg,
        train_cfg.batch_pages_for(&config.source_id),
        &weights,
        seed::derive_indexed(config.seeds.dropout, "fold-dropout", fold as u64),
    )?;
    if report.skipped_batches > 0 || report.skipped_pages > 0 {
        log::warn!(
            "{} fold {fold}: skipped {} batches and {} page visits without usable supervision",
            config.source_id,
            report.skipped_batches,
            report.skipped_pages
        );
    }
    let (predictions, metrics) = evaluate(&mut model, &test)?;
    Ok(FoldOutcome { fold, metrics, predictions, report, checkpoint: model.checkpoint(), weights })
}

/// Run all five folds on up to `jobs` worker threads. Outcomes come back in
/// fold order regardless of scheduling.
pub fn run_experiment(config: &RunConfig, data: &Dataset, plan: &SplitPlan, jobs: usize) -> Result<Vec<FoldOutcome>, TrainError> {
    config.validate()?;
    let workers = jobs.clamp(1, plan.folds.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let fold = next.fetch_add(1, Ordering::SeqCst);
                if fold >= plan.folds.len() {
                    break;
                }
                if tx.send((fold, run_fold(config, data, plan, fold))).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut collected: BTreeMap<usize, FoldOutcome> = BTreeMap::new();
    for (fold, outcome) in rx {
        collected.insert(fold, outcome?);
    }
    Ok(collected.into_values().collect())
}

/// Document ids shared between a fold's train and test sides (always empty
/// for plans produced by [`make_splits`]).
pub fn leaked_documents(plan: &SplitPlan) -> Vec<String> {
    plan.folds
        .iter()
        .flat_map(|f| {
            let train: BTreeSet<&String> = f.train_doc_ids.iter().collect();
            f.test_doc_ids.iter().filter(move |d| train.contains(d)).cloned().collect::<Vec<_>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::make_synthetic_corpus;

    fn docs(n: usize) -> Vec<Document> {
        make_synthetic_corpus(3, n, 1, 4)
    }

    #[test]
    fn ten_docs_split_evenly() {
        let plan = make_splits(&docs(10), "SYNTH", 1).unwrap();
        for f in &plan.folds {
            assert_eq!((f.test_doc_ids.len(), f.train_doc_ids.len()), (2, 8));
        }
    }

    #[test]
    fn eleven_docs_partition_arithmetic() {
        let corpus = docs(11);
        let plan = make_splits(&corpus, "SYNTH", 9).unwrap();
        let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test_doc_ids.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        let mut all: Vec<&String> = plan.folds.iter().flat_map(|f| &f.test_doc_ids).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 11);
        assert!(leaked_documents(&plan).is_empty());
        assert_eq!(plan, make_splits(&corpus, "SYNTH", 9).unwrap());
        let mut reversed = corpus.clone();
        reversed.reverse();
        assert_eq!(plan, make_splits(&reversed, "SYNTH", 9).unwrap());
    }

    #[test]
    fn too_few_documents() {
        assert!(matches!(make_splits(&docs(4), "SYNTH", 1), Err(TrainError::Fold { docs: 4, .. })));
        assert!(matches!(make_splits(&docs(8), "OTHER", 1), Err(TrainError::Fold { docs: 0, .. })));
    }

    #[test]
    fn weight_rules() {
        assert_eq!(class_weights([10, 10, 10, 10], ClassWeightMode::InverseFrequency), [1.0; 4]);
        assert_eq!(class_weights([3, 50, 7, 1], ClassWeightMode::Uniform), [1.0; 4]);
        let w = class_weights([10, 10, 10, 70], ClassWeightMode::InverseFrequency);
        // 1/count = (7,7,7,1)/70, mean 22/280
        for (got, want) in w.iter().zip([14.0 / 11.0, 14.0 / 11.0, 14.0 / 11.0, 2.0 / 11.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let w = class_weights([0, 1, 3, 7], ClassWeightMode::InverseFrequency);
        assert!(w.iter().all(|v| v.is_finite()) && (w.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert!(w[0] > w[1] && w[1] > w[2] && w[2] > w[3]);
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.epochs = 0;
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));
        let c = TrainConfig { batch_overrides: [("BOE".to_owned(), 4)].into(), ..TrainConfig::default() };
        assert_eq!((c.batch_pages_for("BOE"), c.batch_pages_for("BOPV")), (4, 16));
    }

    #[test]
    fn run_config_json() {
        let text = r#"{
            "source_id": "BOE", "framework": "dual", "backbone_text": "sage", "backbone_vision": "tagcn",
            "graph": {"kind": "k_closest", "k": 4}, "depth": 2, "hidden": 256, "head_hidden": 128,
            "epochs": 350, "lr": 0.001, "momentum": 0.9, "dropout": 0.1, "batch_pages": 16,
            "class_weight_mode": "inverse_frequency", "seeds": {"split": 1, "init": 2, "dropout": 3}
        }"#;
        let c = RunConfig::from_json(text).unwrap();
        let spec = c.framework_spec().unwrap();
        assert_eq!(spec.backbone_label(), "S+T");
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
        let single = RunConfig::from_json(r#"{"source_id":"A","framework":"single","modality":"vision","backbone_text":"gcn"}"#).unwrap();
        assert_eq!(single.framework_spec().unwrap().kind, FrameworkKind::Single(Modality::Vision));
        let table = RunConfig::from_json(r#"{"source_id":"A","framework":"concat","backbone_text":"gcn","batch_pages":{"default":8,"A":2}}"#).unwrap();
        assert_eq!(table.train_config().batch_pages_for("A"), 2);
        assert_eq!(table.train_config().batch_pages_for("B"), 8);
        assert!(RunConfig::from_json(r#"{"source_id":"A","framework":"dual","backbone_text":"gcn"}"#).unwrap().validate().is_err());
        assert!(RunConfig::from_json(r#"{"source_id":"A","framework":"dual","backbone_text":"gcn","typo":1}"#).is_err());
    }

    #[test]
    fn predictions_csv_header() {
        let rows = vec![Prediction {
            doc_id: "d".into(),
            page_index: 0,
            object_id: "o".into(),
            true_label: "title".into(),
            pred_label: "body".into(),
        }];
        assert_eq!(predictions_to_csv(&rows), "doc_id,page_index,object_id,true_label,pred_label\nd,0,o,title,body\n");
        assert!(predictions_to_csv(&[]).starts_with("doc_id,"));
    }
}
