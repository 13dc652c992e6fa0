//! Per-object embedding tables and the EMB1 binary format.
//!
//! EMB1 layout (little-endian):
//!
//! ```text
//! "EMB1" | u8 modality (0 text, 1 vision) | u32 count | u32 dim
//! count × ( u16 id_len | id bytes (UTF-8) | dim × f32 )
//! ```
//!
//! Records are sorted ascending by object id byte order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::corpus::{Category, Document, Page};
use crate::nncore::Matrix;
use crate::seed;

const MAGIC: &[u8; 4] = b"EMB1";
pub const HEADER_LEN: usize = 4 + 1 + 4 + 4;

/// Default class-signal strength of synthesized features.
pub const DEFAULT_CLASS_SIGNAL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Vision,
}

impl Modality {
    pub fn tag(self) -> u8 {
        match self {
            Modality::Text => 0,
            Modality::Vision => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Modality::Text),
            1 => Some(Modality::Vision),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Vision => "vision",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum FeatError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("EMB1 format error: {0}")]
    Format(String),
    #[error("expected {expected} embeddings, file holds {found}")]
    ModalityMismatch { expected: Modality, found: Modality },
    #[error("non-finite value in embedding of {0}")]
    NonFiniteValue(String),
    #[error("embedding of {object_id} has length {len}, table dim is {dim}")]
    DimMismatch { object_id: String, len: usize, dim: usize },
    #[error("no {modality} embedding for object {object_id}")]
    Coverage { modality: Modality, object_id: String },
}

/// Object-id → feature vector store for one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    modality: Modality,
    dim: usize,
    entries: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(modality: Modality, dim: usize) -> Self {
        assert!(dim >= 1, "embedding dim must be positive");
        Self { modality, dim, entries: BTreeMap::new() }
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, object_id: &str) -> Option<&[f32]> {
        self.entries.get(object_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn insert(&mut self, object_id: impl Into<String>, vector: Vec<f32>) -> Result<(), FeatError> {
        let object_id = object_id.into();
        if vector.len() != self.dim {
            return Err(FeatError::DimMismatch { object_id, len: vector.len(), dim: self.dim });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(FeatError::NonFiniteValue(object_id));
        }
        self.entries.insert(object_id, vector);
        Ok(())
    }

    /// Object ids of `documents` that have no entry.
    pub fn missing<'a>(&self, documents: impl IntoIterator<Item = &'a Document>) -> Vec<String> {
        documents
            .into_iter()
            .flat_map(|d| &d.pages)
            .flat_map(|p| &p.objects)
            .filter(|o| !self.entries.contains_key(&o.object_id))
            .map(|o| o.object_id.clone())
            .collect()
    }

    /// Node feature matrix of a page, rows in object order.
    pub fn page_matrix(&self, page: &Page) -> Result<Matrix, FeatError> {
        let mut data = Vec::with_capacity(page.objects.len() * self.dim);
        for obj in &page.objects {
            let v = self.get(&obj.object_id).ok_or_else(|| FeatError::Coverage {
                modality: self.modality,
                object_id: obj.object_id.clone(),
            })?;
            data.extend(v.iter().map(|&x| f64::from(x)));
        }
        Ok(Matrix::from_vec(page.objects.len(), self.dim, data))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.entries.keys().map(|k| 2 + k.len() + 4 * self.dim).sum();
        let mut out = Vec::with_capacity(HEADER_LEN + payload);
        out.extend_from_slice(MAGIC);
        out.push(self.modality.tag());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for (id, v) in &self.entries {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], expected: Modality) -> Result<Self, FeatError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(FeatError::Format("bad magic".into()));
        }
        let tag = r.take(1)?[0];
        let found = Modality::from_tag(tag).ok_or_else(|| FeatError::Format(format!("unknown modality tag {tag}")))?;
        if found != expected {
            return Err(FeatError::ModalityMismatch { expected, found });
        }
        let count = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(FeatError::Format("dim is zero".into()));
        }
        let mut table = EmbeddingTable::new(found, dim);
        let mut prev: Option<String> = None;
        for _ in 0..count {
            let len = r.u16()? as usize;
            let id = std::str::from_utf8(r.take(len)?)
                .map_err(|e| FeatError::Format(format!("object id is not UTF-8: {e}")))?
                .to_owned();
            if prev.as_deref().is_some_and(|p| p >= id.as_str()) {
                return Err(FeatError::Format(format!("records not strictly sorted at {id}")));
            }
            let raw = r.take(4 * dim)?;
            let v: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            table.insert(id.clone(), v)?;
            prev = Some(id);
        }
        if r.pos != bytes.len() {
            return Err(FeatError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(table)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FeatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| FeatError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, FeatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FeatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_embeddings(path: impl AsRef<Path>, expected: Modality) -> Result<EmbeddingTable, FeatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| FeatError::Io { path: path.display().to_string(), source })?;
    EmbeddingTable::from_bytes(&bytes, expected)
}

pub fn write_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<(), FeatError> {
    let path = path.as_ref();
    crate::cli::write_atomic(path, &table.to_bytes())
        .map_err(|source| FeatError::Io { path: path.display().to_string(), source })
}

/// Seeded unit vector, normal direction.
fn unit_gaussian(rng: &mut seed::Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn category_direction(category: Category, modality: Modality, dim: usize, seed: u64) -> Vec<f64> {
    let label = format!("class-direction/{}/{}", modality.name(), category.name());
    unit_gaussian(&mut seed::rng(seed::derive(seed, &label)), dim)
}

/// Hash-seeded stand-in features: per object, a unit pseudo-random vector
/// keyed by `(object_id, modality, seed)` plus `class_signal` times a unit
/// direction that depends only on the object's category.
pub fn synth_embeddings<'a>(
    documents: impl IntoIterator<Item = &'a Document>,
    modality: Modality,
    dim: usize,
    seed: u64,
    class_signal: f64,
) -> EmbeddingTable {
    let directions: Vec<Vec<f64>> = Category::ALL
        .iter()
        .map(|&c| category_direction(c, modality, dim, seed))
        .collect();
    let mut table = EmbeddingTable::new(modality, dim);
    for obj in documents.into_iter().flat_map(|d| &d.pages).flat_map(|p| &p.objects) {
        let key = seed::mix(seed::fnv1a(obj.object_id.as_bytes()) ^ seed::derive(seed, modality.name()));
        let noise = unit_gaussian(&mut seed::rng(key), dim);
        let cat = Category::ALL.iter().position(|&c| c == obj.category).unwrap();
        let v = noise
            .iter()
            .zip(&directions[cat])
            .map(|(n, d)| (n + class_signal * d) as f32)
            .collect();
        table.insert(obj.object_id.clone(), v).expect("synthesized vector is valid");
    }
    table
}
