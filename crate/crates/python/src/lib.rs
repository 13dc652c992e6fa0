//! Python bindings for the layoutgnn engine.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use layoutgnn::corpus::{self, Document};
use layoutgnn::featstore::{self, EmbeddingTable, Modality};
use layoutgnn::graphbuild::GraphKind;
use layoutgnn::metrics::{self, FoldMetrics};
use layoutgnn::trainer::{self, RunConfig};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_modality(name: &str) -> PyResult<Modality> {
    match name {
        "text" => Ok(Modality::Text),
        "vision" => Ok(Modality::Vision),
        other => Err(PyValueError::new_err(format!("unknown modality {other:?}"))),
    }
}

/// A validated set of documents.
#[pyclass(module = "layoutgnn_py")]
struct Corpus {
    docs: Vec<Document>,
}

#[pymethods]
impl Corpus {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { docs: corpus::parse_manifest(text).map_err(value_error)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { docs: corpus::ingest_manifest(path).map_err(value_error)? })
    }

    #[staticmethod]
    #[pyo3(signature = (seed, docs=20, pages=2, objects=10))]
    fn synthetic(seed: u64, docs: usize, pages: usize, objects: usize) -> Self {
        Self { docs: corpus::make_synthetic_corpus(seed, docs, pages, objects) }
    }

    fn to_json(&self) -> String {
        corpus::to_manifest_json(&self.docs)
    }

    fn doc_ids(&self) -> Vec<String> {
        self.docs.iter().map(|d| d.doc_id.clone()).collect()
    }

    fn sources(&self) -> Vec<String> {
        let mut s: Vec<String> = self.docs.iter().map(|d| d.source_id.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    /// Object count per page as `(doc_id, page_index, n_objects)`.
    fn pages(&self) -> Vec<(String, usize, usize)> {
        self.docs
            .iter()
            .flat_map(|d| d.pages.iter().map(move |p| (d.doc_id.clone(), p.page_index, p.objects.len())))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.docs.len()
    }

    fn __repr__(&self) -> String {
        format!("Corpus({} documents)", self.docs.len())
    }
}

/// Per-object embedding vectors of one modality.
#[pyclass(module = "layoutgnn_py")]
struct Embeddings {
    table: EmbeddingTable,
}

#[pymethods]
impl Embeddings {
    #[staticmethod]
    #[pyo3(signature = (corpus, modality, dim, seed, class_signal=featstore::DEFAULT_CLASS_SIGNAL))]
    fn synthetic(corpus: &Corpus, modality: &str, dim: usize, seed: u64, class_signal: f64) -> PyResult<Self> {
        let m = parse_modality(modality)?;
        Ok(Self { table: featstore::synth_embeddings(&corpus.docs, m, dim, seed, class_signal) })
    }

    #[staticmethod]
    fn load(path: &str, modality: &str) -> PyResult<Self> {
        Ok(Self { table: featstore::load_embeddings(path, parse_modality(modality)?).map_err(value_error)? })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8], modality: &str) -> PyResult<Self> {
        Ok(Self { table: EmbeddingTable::from_bytes(data, parse_modality(modality)?).map_err(value_error)? })
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.table.to_bytes()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        featstore::write_embeddings(&self.table, path).map_err(value_error)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.table.dim()
    }

    #[getter]
    fn modality(&self) -> &'static str {
        self.table.modality().name()
    }

    fn get(&self, object_id: &str) -> PyResult<Vec<f32>> {
        self.table.get(object_id).map(<[f32]>::to_vec).ok_or_else(|| PyKeyError::new_err(object_id.to_owned()))
    }

    /// Object ids of `corpus` that have no vector here.
    fn missing(&self, corpus: &Corpus) -> Vec<String> {
        self.table.missing(&corpus.docs)
    }

    fn __len__(&self) -> usize {
        self.table.len()
    }
}

/// Undirected edges `(i, j)`, `i < j`, of one page's graph. `kind` is
/// `"complete"` or `"k-closest:K"`.
#[pyfunction]
fn page_edges(corpus: &Corpus, doc_id: &str, page_index: usize, kind: &str) -> PyResult<Vec<(usize, usize)>> {
    let kind = GraphKind::parse_label(kind).ok_or_else(|| PyValueError::new_err(format!("bad graph kind {kind:?}")))?;
    let doc = corpus.docs.iter().find(|d| d.doc_id == doc_id).ok_or_else(|| PyKeyError::new_err(doc_id.to_owned()))?;
    let page = doc
        .pages
        .iter()
        .find(|p| p.page_index == page_index)
        .ok_or_else(|| PyKeyError::new_err(format!("{doc_id} page {page_index}")))?;
    Ok(kind.build(page).edges)
}

/// Five `(train_doc_ids, test_doc_ids)` folds over one source.
#[pyfunction]
fn make_splits(corpus: &Corpus, source_id: &str, seed: u64) -> PyResult<Vec<(Vec<String>, Vec<String>)>> {
    let plan = trainer::make_splits(&corpus.docs, source_id, seed).map_err(value_error)?;
    Ok(plan.folds.into_iter().map(|f| (f.train_doc_ids, f.test_doc_ids)).collect())
}

fn metrics_dict(m: &FoldMetrics) -> BTreeMap<String, Option<f64>> {
    let mut d = BTreeMap::new();
    d.insert("overall".to_owned(), Some(m.overall));
    for (c, name) in corpus::Category::CLASSES.iter().enumerate() {
        d.insert(name.name().to_owned(), m.per_class[c]);
    }
    d
}

/// Overall and per-class accuracy; absent classes map to `None`.
#[pyfunction]
fn fold_metrics(predictions: Vec<usize>, truths: Vec<usize>) -> PyResult<BTreeMap<String, Option<f64>>> {
    Ok(metrics_dict(&metrics::fold_metrics(&predictions, &truths).map_err(value_error)?))
}

/// Run the five-fold protocol for a config given as JSON text. Returns one
/// metrics dict per fold, in fold order, plus the results CSV text.
#[pyfunction]
#[pyo3(signature = (config_json, corpus, text=None, vision=None, jobs=1))]
fn run_experiment(
    py: Python<'_>,
    config_json: &str,
    corpus: &Corpus,
    text: Option<&Embeddings>,
    vision: Option<&Embeddings>,
    jobs: usize,
) -> PyResult<(Vec<BTreeMap<String, Option<f64>>>, String)> {
    let config = RunConfig::from_json(config_json).map_err(value_error)?;
    config.validate().map_err(value_error)?;
    let spec = config.framework_spec().map_err(value_error)?;
    let (docs, t, v) = (corpus.docs.clone(), text.map(|e| e.table.clone()), vision.map(|e| e.table.clone()));
    let outcomes = py
        .detach(move || -> Result<_, trainer::TrainError> {
            let data = trainer::Dataset::prepare(&docs, &config.source_id, spec.graph, spec.kind, t.as_ref(), v.as_ref())?;
            let plan = trainer::make_splits(&docs, &config.source_id, config.seeds.split)?;
            let outcomes = trainer::run_experiment(&config, &data, &plan, jobs.max(1))?;
            let rows: Vec<_> = outcomes.iter().map(|o| o.result_row(&config, &spec)).collect();
            let csv = metrics::results_to_csv(&rows)?;
            Ok((outcomes.iter().map(|o| metrics_dict(&o.metrics)).collect(), csv))
        })
        .map_err(value_error)?;
    Ok(outcomes)
}

/// Markdown summary tables for results CSV text.
#[pyfunction]
fn render_report(results_csv: &str) -> PyResult<String> {
    let rows = metrics::results_from_csv(results_csv).map_err(value_error)?;
    Ok(metrics::render_report(&rows).map_err(value_error)?.markdown)
}

#[pymodule]
fn layoutgnn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<Embeddings>()?;
    m.add_function(wrap_pyfunction!(page_edges, m)?)?;
    m.add_function(wrap_pyfunction!(make_splits, m)?)?;
    m.add_function(wrap_pyfunction!(fold_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(render_report, m)?)?;
    Ok(())
}
