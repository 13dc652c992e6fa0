//! Document / page / layout-object data model and the JSON manifest.
//!
//! Coordinates are PDF points with the origin at the top-left corner and y
//! growing downward. The order of `Page::objects` is the manifest order and
//! defines the node index used by every downstream module.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest JSON: {0}")]
    Parse(#[source] serde_json::Error),
    #[error("manifest schema error: {0}")]
    Schema(String),
    #[error("{} invariant violation(s); first: {}", .0.len(), .0[0])]
    Invariant(Vec<Violation>),
}

/// One failed invariant, located by document, page and object.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub doc_id: String,
    pub page_index: Option<usize>,
    pub object_id: Option<String>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "document {}", self.doc_id)?;
        if let Some(p) = self.page_index {
            write!(f, ", page {p}")?;
        }
        if let Some(o) = &self.object_id {
            write!(f, ", object {o}")?;
        }
        write!(f, ": {}", self.reason)
    }
}

/// Axis-aligned box `[x0, y0, x1, y1]` in page points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([x0, y0, x1, y1]: [f64; 4]) -> Self {
        Self { x0, y0, x1, y1 }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    /// Reason the box is invalid, if it is.
    pub fn check(&self) -> Option<String> {
        let all = [self.x0, self.y0, self.x1, self.y1];
        if all.iter().any(|v| !v.is_finite()) {
            return Some(format!("non-finite bbox {all:?}"));
        }
        if self.x0 >= self.x1 || self.y0 >= self.y1 {
            return Some(format!("degenerate bbox {all:?} (need x0 < x1 and y0 < y1)"));
        }
        None
    }

    pub fn within(&self, width: f64, height: f64) -> bool {
        self.x0 >= 0.0 && self.y0 >= 0.0 && self.x1 <= width && self.y1 <= height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Image,
    Table,
    Link,
    Identifier,
    Title,
    Summary,
    Body,
}

/// Number of supervised text classes.
pub const NUM_CLASSES: usize = 4;

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Image,
        Category::Table,
        Category::Link,
        Category::Identifier,
        Category::Title,
        Category::Summary,
        Category::Body,
    ];

    /// Text classes in label-index order.
    pub const CLASSES: [Category; NUM_CLASSES] = [
        Category::Identifier,
        Category::Title,
        Category::Summary,
        Category::Body,
    ];

    /// Label index in `0..4` for the four text classes, `None` otherwise.
    pub fn class_index(self) -> Option<usize> {
        match self {
            Category::Identifier => Some(0),
            Category::Title => Some(1),
            Category::Summary => Some(2),
            Category::Body => Some(3),
            _ => None,
        }
    }

    pub fn from_class_index(i: usize) -> Option<Category> {
        Self::CLASSES.get(i).copied()
    }

    pub fn is_text_class(self) -> bool {
        self.class_index().is_some()
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Image => "image",
            Category::Table => "table",
            Category::Link => "link",
            Category::Identifier => "identifier",
            Category::Title => "title",
            Category::Summary => "summary",
            Category::Body => "body",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutObject {
    pub object_id: String,
    pub bbox: BBox,
    pub category: Category,
    /// Raw text for the text classes, the URL for links.
    #[serde(default)]
    pub text: Option<String>,
    /// Row-major table cells; only tables carry these.
    #[serde(default)]
    pub cells: Option<Vec<Vec<String>>>,
}

impl LayoutObject {
    fn content_violation(&self) -> Option<String> {
        let needs_text = self.category.is_text_class() || self.category == Category::Link;
        let needs_cells = self.category == Category::Table;
        match (needs_text, self.text.is_some()) {
            (true, false) => return Some(format!("{} object requires text", self.category)),
            (false, true) => return Some(format!("{} object must not carry text", self.category)),
            _ => {}
        }
        match (needs_cells, self.cells.is_some()) {
            (true, false) => Some("table object requires cells".into()),
            (false, true) => Some(format!("{} object must not carry cells", self.category)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub page_index: usize,
    pub width: f64,
    pub height: f64,
    pub objects: Vec<LayoutObject>,
}

impl Page {
    /// Per-node label index, `None` for non-text nodes.
    pub fn labels(&self) -> Vec<Option<usize>> {
        self.objects.iter().map(|o| o.category.class_index()).collect()
    }

    pub fn text_node_count(&self) -> usize {
        self.objects.iter().filter(|o| o.category.is_text_class()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub source_id: String,
    pub pages: Vec<Page>,
}

impl Document {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let v = |page: Option<usize>, obj: Option<&str>, reason: String| Violation {
            doc_id: self.doc_id.clone(),
            page_index: page,
            object_id: obj.map(str::to_owned),
            reason,
        };
        if self.pages.is_empty() {
            out.push(v(None, None, "document has no pages".into()));
        }
        let mut page_indices = HashSet::new();
        let mut ids = HashSet::new();
        for page in &self.pages {
            let p = Some(page.page_index);
            if !page_indices.insert(page.page_index) {
                out.push(v(p, None, "duplicate page_index".into()));
            }
            if !(page.width.is_finite() && page.height.is_finite() && page.width > 0.0 && page.height > 0.0) {
                out.push(v(p, None, format!("invalid page size {}x{}", page.width, page.height)));
            }
            for obj in &page.objects {
                let o = Some(obj.object_id.as_str());
                if !ids.insert(obj.object_id.as_str()) {
                    out.push(v(p, o, "duplicate object_id".into()));
                }
                if let Some(reason) = obj.bbox.check() {
                    out.push(v(p, o, reason));
                } else if !obj.bbox.within(page.width, page.height) {
                    out.push(v(p, o, format!("bbox {:?} outside page bounds", <[f64; 4]>::from(obj.bbox))));
                }
                if let Some(reason) = obj.content_violation() {
                    out.push(v(p, o, reason));
                }
            }
        }
        out
    }
}

/// Every invariant violation across a set of documents, including
/// duplicate `doc_id`s.
pub fn validate(documents: &[Document]) -> Vec<Violation> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for doc in documents {
        if !seen.insert(doc.doc_id.as_str()) {
            out.push(Violation {
                doc_id: doc.doc_id.clone(),
                page_index: None,
                object_id: None,
                reason: "duplicate doc_id".into(),
            });
        }
        out.extend(doc.violations());
    }
    out
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    documents: Vec<Document>,
}

#[derive(Serialize)]
struct ManifestRef<'a> {
    documents: &'a [Document],
}

pub fn parse_manifest(text: &str) -> Result<Vec<Document>, CorpusError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(CorpusError::Parse)?;
    let manifest: Manifest = serde_json::from_value(value).map_err(|e| CorpusError::Schema(e.to_string()))?;
    let violations = validate(&manifest.documents);
    if !violations.is_empty() {
        return Err(CorpusError::Invariant(violations));
    }
    Ok(manifest.documents)
}

/// Read and validate a manifest file.
pub fn ingest_manifest(path: impl AsRef<Path>) -> Result<Vec<Document>, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_manifest(&text)
}

/// Canonical manifest serialization (pretty JSON, trailing newline).
pub fn to_manifest_json(documents: &[Document]) -> String {
    let mut s = serde_json::to_string_pretty(&ManifestRef { documents }).expect("manifest serializes");
    s.push('\n');
    s
}

pub fn write_manifest(documents: &[Document], path: impl AsRef<Path>) -> std::io::Result<()> {
    crate::cli::write_atomic(path.as_ref(), to_manifest_json(documents).as_bytes())
}

/// Documents of one source, in input order.
pub fn by_source<'a>(documents: &'a [Document], source_id: &str) -> Vec<&'a Document> {
    documents.iter().filter(|d| d.source_id == source_id).collect()
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

pub const SYNTH_SOURCE: &str = "SYNTH";
const PAGE_WIDTH: f64 = 595.0;
const PAGE_HEIGHT: f64 = 842.0;
const MARGIN: f64 = 36.0;

const SYLLABLES: [&str; 16] = [
    "ar", "to", "de", "la", "ci", "on", "es", "re", "so", "lu", "men", "ta", "ley", "bo", "ri", "va",
];

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn pseudo_word(rng: &mut seed::Rng) -> String {
    let n = rng.gen_range(1..=3);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

fn pseudo_text(rng: &mut seed::Rng, words: usize) -> String {
    (0..words).map(|_| pseudo_word(rng)).collect::<Vec<_>>().join(" ")
}

fn synth_content(category: Category, rng: &mut seed::Rng) -> (Option<String>, Option<Vec<Vec<String>>>) {
    match category {
        Category::Image => (None, None),
        Category::Table => {
            let rows = rng.gen_range(1..=3);
            let cols = rng.gen_range(1..=3);
            let cells = (0..rows)
                .map(|_| (0..cols).map(|_| pseudo_word(rng)).collect())
                .collect();
            (None, Some(cells))
        }
        Category::Link => (Some(format!("https://example.org/{}", pseudo_word(rng))), None),
        Category::Identifier => (Some(format!("{}-{}", pseudo_word(rng).to_uppercase(), rng.gen_range(1..10_000))), None),
        Category::Title => {
            let n = rng.gen_range(2..=6);
            (Some(pseudo_text(rng, n)), None)
        }
        Category::Summary => {
            let n = rng.gen_range(6..=15);
            (Some(pseudo_text(rng, n)), None)
        }
        Category::Body => {
            let n = rng.gen_range(10..=40);
            (Some(pseudo_text(rng, n)), None)
        }
    }
}

/// Seeded desk-scale corpus of `n_docs` documents in the `SYNTH` source.
///
/// Objects sit in disjoint horizontal bands in reading order. When the
/// corpus has at least seven objects, every category occurs.
///
/// # Panics
/// If any count is zero.
pub fn make_synthetic_corpus(seed: u64, n_docs: usize, pages_per_doc: usize, objects_per_page: usize) -> Vec<Document> {
    assert!(n_docs >= 1 && pages_per_doc >= 1 && objects_per_page >= 1, "synthetic corpus counts must be >= 1");
    let mut rng = seed::rng(seed::derive(seed, "synthetic-corpus"));
    // Image, Table, Link, Identifier, Title, Summary, Body
    let weights = WeightedIndex::new([0.6, 0.5, 0.5, 1.0, 1.5, 1.2, 4.0]).unwrap();
    let mut forced: Vec<Category> = Category::ALL.to_vec();
    forced.shuffle(&mut rng);

    let band = (PAGE_HEIGHT - 2.0 * MARGIN) / objects_per_page as f64;
    let mut global = 0usize;
    (0..n_docs)
        .map(|d| {
            let doc_id = format!("synth-{seed}-{d:04}");
            let pages = (0..pages_per_doc)
                .map(|p| {
                    let objects = (0..objects_per_page)
                        .map(|j| {
                            let category = if global < forced.len() {
                                forced[global]
                            } else {
                                Category::ALL[weights.sample(&mut rng)]
                            };
                            global += 1;
                            let top = MARGIN + j as f64 * band;
                            let inset = rng.gen_range(0.05..0.2) * band;
                            let extent = rng.gen_range(0.5..0.75) * band;
                            let x0 = MARGIN + rng.gen_range(0.0..150.0);
                            let x1 = PAGE_WIDTH - MARGIN - rng.gen_range(0.0..150.0);
                            let (text, cells) = synth_content(category, &mut rng);
                            LayoutObject {
                                object_id: format!("{doc_id}-p{p}-o{j}"),
                                bbox: BBox::new(round2(x0), round2(top + inset), round2(x1), round2(top + inset + extent)),
                                category,
                                text,
                                cells,
                            }
                        })
                        .collect();
                    Page { page_index: p, width: PAGE_WIDTH, height: PAGE_HEIGHT, objects }
                })
                .collect();
            Document { doc_id, source_id: SYNTH_SOURCE.into(), pages }
        })
        .collect()
}
