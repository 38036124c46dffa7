//! Write-once caches for embeddings and dimension scores.
//!
//! Embedding cache file layout (all integers little-endian):
//!
//! ```text
//! "TSIG" | version: u16 | count: u64 | dim: u32 | count * dim f32, row-major
//! ```
//!
//! A JSON sidecar (`<file>.json`) maps each `doc_id` to its row. Rows are
//! written in `doc_id` order so the file does not depend on arrival order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, write_atomic};

pub const TSIG_MAGIC: &[u8; 4] = b"TSIG";
pub const TSIG_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 4;

#[derive(Default)]
struct Rows {
    dim: Option<usize>,
    rows: BTreeMap<String, Vec<f32>>,
}

/// Embeddings keyed by `(doc_id, model_name)`; one cache instance holds one model.
pub struct EmbeddingCache {
    model_name: String,
    inner: RwLock<Rows>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    model_name: String,
    dim: usize,
    rows: BTreeMap<String, u64>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl EmbeddingCache {
    pub fn new(model_name: impl Into<String>) -> Self {
        Self {
            model_name: model_name.into(),
            inner: RwLock::new(Rows::default()),
        }
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn dim(&self) -> Option<usize> {
        self.inner.read().unwrap().dim
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap().rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.inner.read().unwrap().rows.contains_key(doc_id)
    }

    pub fn get(&self, doc_id: &str) -> Option<Vec<f32>> {
        self.inner.read().unwrap().rows.get(doc_id).cloned()
    }

    /// Inserts a batch atomically. Existing entries are kept (write-once).
    pub fn insert_all(&self, entries: impl IntoIterator<Item = (String, Vec<f32>)>) -> Result<()> {
        let entries: Vec<_> = entries.into_iter().collect();
        let mut inner = self.inner.write().unwrap();
        let dim = inner.dim.or_else(|| entries.first().map(|(_, v)| v.len()));
        if let Some(dim) = dim {
            if let Some((id, v)) = entries.iter().find(|(_, v)| v.len() != dim) {
                return Err(Error::Protocol(format!(
                    "embedding for {id} has dimension {}, cache holds {dim}",
                    v.len()
                )));
            }
        }
        inner.dim = dim;
        for (id, v) in entries {
            inner.rows.entry(id).or_insert(v);
        }
        Ok(())
    }

    /// Writes the binary matrix and its sidecar, each atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        let inner = self.inner.read().unwrap();
        let dim = inner.dim.unwrap_or(0);
        let mut buf = Vec::with_capacity(HEADER_LEN + inner.rows.len() * dim * 4);
        buf.extend_from_slice(TSIG_MAGIC);
        buf.extend_from_slice(&TSIG_VERSION.to_le_bytes());
        buf.extend_from_slice(&(inner.rows.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
        let mut index = BTreeMap::new();
        for (row, (id, values)) in inner.rows.iter().enumerate() {
            index.insert(id.clone(), row as u64);
            for v in values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        write_atomic(path, &buf)?;
        io::write_json(
            &sidecar_path(path),
            &Sidecar {
                model_name: self.model_name.clone(),
                dim,
                rows: index,
            },
        )
    }

    /// Loads a cache written by [`save`](Self::save). A missing file yields an
    /// empty cache; a file for a different model is a configuration error.
    pub fn load_or_new(path: &Path, model_name: &str) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::new(model_name));
        }
        let cache = Self::load(path)?;
        if cache.model_name != model_name {
            return Err(Error::Configuration(format!(
                "{} caches model {:?}, configured model is {model_name:?}",
                path.display(),
                cache.model_name
            )));
        }
        Ok(cache)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::Ingestion(format!("{}: {msg}", path.display()));
        if bytes.len() < HEADER_LEN || &bytes[..4] != TSIG_MAGIC {
            return Err(bad("not a TSIG embedding file"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != TSIG_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = u64::from_le_bytes(bytes[6..14].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[14..18].try_into().unwrap()) as usize;
        let expected = count
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_LEN));
        if expected != Some(bytes.len()) {
            return Err(bad("length does not match header"));
        }
        let sidecar: Sidecar = io::read_json(&sidecar_path(path))?;
        if sidecar.dim != dim || sidecar.rows.len() != count {
            return Err(bad("sidecar disagrees with header"));
        }
        let body = &bytes[HEADER_LEN..];
        let mut rows = BTreeMap::new();
        for (id, row) in sidecar.rows {
            let row = row as usize;
            if row >= count {
                return Err(bad(&format!("row {row} for {id} out of range")));
            }
            let values = body[row * dim * 4..(row + 1) * dim * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            rows.insert(id, values);
        }
        Ok(Self {
            model_name: sidecar.model_name,
            inner: RwLock::new(Rows {
                dim: (count > 0).then_some(dim),
                rows,
            }),
        })
    }
}

/// Dimension scores keyed by `(doc_id, dict_id, dim_id)`.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ScoreCache {
    entries: BTreeMap<(String, String, String), f64>,
}

impl ScoreCache {
    pub fn get(&self, doc_id: &str, dict_id: &str, dim_id: &str) -> Option<f64> {
        self.entries
            .get(&(doc_id.to_owned(), dict_id.to_owned(), dim_id.to_owned()))
            .copied()
    }

    pub fn insert(&mut self, doc_id: &str, dict_id: &str, dim_id: &str, score: f64) {
        self.entries
            .entry((doc_id.to_owned(), dict_id.to_owned(), dim_id.to_owned()))
            .or_insert(score);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV `doc_id,dict_id,dim_id,score`; floats use shortest round-trip form.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = ["doc_id", "dict_id", "dim_id", "score"].map(String::from);
        let bytes = io::csv_bytes(&header, |w| {
            for ((doc, dict, dim), score) in &self.entries {
                w.write_record([doc.as_str(), dict, dim, &score.to_string()])?;
            }
            Ok(())
        })?;
        write_atomic(path, &bytes)
    }

    pub fn load_or_default(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let mut cache = Self::default();
        for rec in rdr.records() {
            let rec = rec?;
            let score: f64 = rec[3]
                .parse()
                .map_err(|_| Error::Ingestion(format!("{}: bad score {:?}", path.display(), &rec[3])))?;
            cache.insert(&rec[0], &rec[1], &rec[2], score);
        }
        Ok(cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsig");
        let c = EmbeddingCache::new("m");
        c.insert_all([("b".to_string(), vec![1.0, 2.0]), ("a".to_string(), vec![3.0, 4.0])])
            .unwrap();
        c.save(&p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"TSIG");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u64::from_le_bytes(bytes[6..14].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[14..18].try_into().unwrap()), 2);
        // "a" sorts first
        assert_eq!(f32::from_le_bytes(bytes[18..22].try_into().unwrap()), 3.0);
        assert_eq!(bytes.len(), 18 + 2 * 2 * 4);
    }

    #[test]
    fn write_once_and_dim_check() {
        let c = EmbeddingCache::new("m");
        c.insert_all([("a".to_string(), vec![1.0])]).unwrap();
        c.insert_all([("a".to_string(), vec![9.0])]).unwrap();
        assert_eq!(c.get("a").unwrap(), vec![1.0]);
        assert!(c.insert_all([("b".to_string(), vec![1.0, 2.0])]).is_err());
        assert!(!c.contains("b"));
    }

    #[test]
    fn model_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsig");
        let c = EmbeddingCache::new("m1");
        c.insert_all([("a".to_string(), vec![1.0])]).unwrap();
        c.save(&p).unwrap();
        assert!(EmbeddingCache::load_or_new(&p, "m2").is_err());
        assert_eq!(EmbeddingCache::load_or_new(&p, "m1").unwrap().len(), 1);
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsig");
        let c = EmbeddingCache::new("m");
        c.insert_all([("a".to_string(), vec![1.0, 2.0])]).unwrap();
        c.save(&p).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, bytes).unwrap();
        assert!(EmbeddingCache::load(&p).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn embedding_cache_round_trips(rows in prop::collection::btree_map("[a-z0-9]{1,8}", prop::collection::vec(-1e6f32..1e6, 3), 1..20)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("e.tsig");
            let c = EmbeddingCache::new("m");
            c.insert_all(rows.clone()).unwrap();
            c.save(&p).unwrap();
            let back = EmbeddingCache::load(&p).unwrap();
            for (id, v) in &rows {
                prop_assert_eq!(back.get(id).unwrap(), v.clone());
            }
            prop_assert_eq!(back.len(), rows.len());
        }

        #[test]
        fn score_cache_round_trips(scores in prop::collection::vec(("[a-z]{1,5}", 0.0f64..=1.0), 1..30)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.csv");
            let mut c = ScoreCache::default();
            for (id, s) in &scores {
                c.insert(id, "dict", "dim", *s);
            }
            c.save(&p).unwrap();
            prop_assert_eq!(ScoreCache::load_or_default(&p).unwrap(), c);
        }
    }
}
