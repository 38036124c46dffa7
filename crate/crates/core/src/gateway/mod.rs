//! Embeddings and pole log-scores from an inference backend.
//!
//! Two backends ship: [`RemoteBackend`] speaks a small JSON-over-HTTP
//! protocol (see `docs/protocol.md`), and [`MockBackend`] derives everything
//! from seeded hashes so the whole pipeline runs offline.

mod cache;
mod mock;
mod remote;

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{EmbeddingCache, ScoreCache, TSIG_MAGIC, TSIG_VERSION};
pub use mock::MockBackend;
pub use remote::RemoteBackend;

use crate::error::{Error, Result};
use crate::model::{DocumentRecord, EmbeddingVector, PositionalDictionary, DEFAULT_EMBEDDING_DIM};

/// Dimension id used for the centrality probe's log-scores.
pub const CENTRALITY_DIM_ID: &str = "centrality";

/// Log-scores for the two poles of one dimension, conditioned on one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleLogScores {
    pub doc_id: String,
    pub dim_id: String,
    pub lambda_low: f64,
    pub lambda_high: f64,
}

impl PoleLogScores {
    pub fn new(doc_id: impl Into<String>, dim_id: impl Into<String>, lambda_low: f64, lambda_high: f64) -> Result<Self> {
        let doc_id = doc_id.into();
        if !(lambda_low.is_finite() && lambda_high.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite log-scores ({lambda_low}, {lambda_high}) for {doc_id}"
            )));
        }
        Ok(Self {
            doc_id,
            dim_id: dim_id.into(),
            lambda_low,
            lambda_high,
        })
    }
}

/// What a backend must provide. Implementations see one batch at a time.
pub trait InferenceBackend: Send + Sync {
    /// One embedding per document, in input order.
    fn embed(&self, docs: &[DocumentRecord]) -> Result<Vec<Vec<f32>>>;

    /// One `(lambda_low, lambda_high)` pair per document, in input order.
    fn logscores(
        &self,
        docs: &[DocumentRecord],
        dim_id: &str,
        low_label: &str,
        high_label: &str,
    ) -> Result<Vec<(f64, f64)>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    Mock,
}

/// Environment variable consulted for the remote base URL.
pub const BACKEND_URL_ENV: &str = "TEXTSIGNAL_BACKEND_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub base_url: Option<String>,
    pub model_name: String,
    pub batch_size: usize,
    pub timeout_ms: u64,
    pub retry_max: u32,
    /// First backoff delay; doubles after each failed attempt.
    pub retry_backoff_ms: u64,
    /// Maximum number of batches dispatched concurrently.
    pub max_in_flight: usize,
    /// Mock only.
    pub seed: u64,
    /// Mock only: embedding dimension.
    pub mock_dim: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            base_url: None,
            model_name: "mock-encoder".into(),
            batch_size: 32,
            timeout_ms: 60_000,
            retry_max: 3,
            retry_backoff_ms: 200,
            max_in_flight: 4,
            seed: 0,
            mock_dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

impl BackendConfig {
    pub fn mock(seed: u64, dim: usize) -> Self {
        Self {
            seed,
            mock_dim: dim,
            ..Self::default()
        }
    }

    pub fn remote(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Remote,
            base_url: Some(base_url.into()),
            model_name: model_name.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch_size must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Parameter("max_in_flight must be positive".into()));
        }
        match self.kind {
            BackendKind::Remote if self.base_url.is_none() => Err(Error::Configuration(format!(
                "remote backend requires base_url (or {BACKEND_URL_ENV})"
            ))),
            BackendKind::Mock if self.mock_dim == 0 => {
                Err(Error::Parameter("mock_dim must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Instantiates the configured backend.
    pub fn build(&self) -> Result<Box<dyn InferenceBackend>> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Mock => Box::new(MockBackend::new(self.seed, self.mock_dim)),
            BackendKind::Remote => Box::new(RemoteBackend::new(
                self.base_url.clone().unwrap_or_default(),
                self.model_name.clone(),
                Duration::from_millis(self.timeout_ms),
            )),
        })
    }
}

fn with_retry<T>(cfg: &BackendConfig, mut call: impl FnMut() -> Result<T>) -> Result<T> {
    let mut delay = cfg.retry_backoff_ms;
    let mut attempt = 0;
    loop {
        match call() {
            Err(e) if e.is_transport() && attempt < cfg.retry_max => {
                log::warn!("backend call failed (attempt {}): {e}", attempt + 1);
                thread::sleep(Duration::from_millis(delay));
                delay = delay.saturating_mul(2);
                attempt += 1;
            }
            other => return other,
        }
    }
}

fn transport_failure(mut err: Error, failed: Vec<String>) -> Error {
    if let Error::Transport { failed_doc_ids, .. } = &mut err {
        *failed_doc_ids = failed;
    }
    err
}

/// Runs `work` over `batches`, at most `max_in_flight` at a time. Results come
/// back in batch order. Stops launching new waves after the first failure.
fn dispatch<'a, T, F>(
    batches: &[&'a [DocumentRecord]],
    max_in_flight: usize,
    work: F,
) -> Vec<(usize, Result<T>)>
where
    T: Send,
    F: Fn(&'a [DocumentRecord]) -> Result<T> + Sync,
{
    let mut out = Vec::with_capacity(batches.len());
    for (wave_no, wave) in batches.chunks(max_in_flight).enumerate() {
        let base = wave_no * max_in_flight;
        let results: Vec<Result<T>> = if wave.len() == 1 {
            vec![work(wave[0])]
        } else {
            thread::scope(|s| {
                let handles: Vec<_> = wave.iter().map(|b| s.spawn(|| work(b))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("backend worker panicked"))
                    .collect()
            })
        };
        let failed = results.iter().any(Result::is_err);
        out.extend(results.into_iter().enumerate().map(|(i, r)| (base + i, r)));
        if failed {
            break;
        }
    }
    out
}

fn require_docs(docs: &[DocumentRecord]) -> Result<()> {
    if docs.is_empty() {
        return Err(Error::Parameter("document list is empty".into()));
    }
    Ok(())
}

/// Embeds `docs`, serving what it can from `cache` and writing new vectors
/// through it. Each batch lands in the cache entirely or not at all.
pub fn embed_batch(
    docs: &[DocumentRecord],
    backend: &dyn InferenceBackend,
    cfg: &BackendConfig,
    cache: &EmbeddingCache,
) -> Result<Vec<EmbeddingVector>> {
    require_docs(docs)?;
    cfg.validate()?;
    let pending: Vec<DocumentRecord> = docs
        .iter()
        .filter(|d| !cache.contains(&d.doc_id))
        .cloned()
        .collect();
    if !pending.is_empty() {
        let batches: Vec<&[DocumentRecord]> = pending.chunks(cfg.batch_size).collect();
        let results = dispatch(&batches, cfg.max_in_flight, |batch| {
            with_retry(cfg, || backend.embed(batch))
        });
        let mut first_err = None;
        let mut done = 0;
        for (i, res) in results {
            let batch = batches[i];
            match res.and_then(|vectors| insert_batch(cache, batch, vectors)) {
                Ok(()) => done += batch.len(),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        if let Some(err) = first_err {
            let failed: Vec<String> = pending
                .iter()
                .filter(|d| !cache.contains(&d.doc_id))
                .map(|d| d.doc_id.clone())
                .collect();
            log::warn!("embedded {done} of {} pending documents", pending.len());
            return Err(transport_failure(err, failed));
        }
    }
    docs.iter()
        .map(|d| {
            let values = cache.get(&d.doc_id).ok_or_else(|| {
                Error::Data(format!("embedding for {} missing after dispatch", d.doc_id))
            })?;
            EmbeddingVector::new(d.doc_id.clone(), values)
        })
        .collect()
}

fn insert_batch(cache: &EmbeddingCache, batch: &[DocumentRecord], vectors: Vec<Vec<f32>>) -> Result<()> {
    if vectors.len() != batch.len() {
        return Err(Error::Protocol(format!(
            "backend returned {} embeddings for {} documents",
            vectors.len(),
            batch.len()
        )));
    }
    let dim = cache.dim().unwrap_or(vectors[0].len());
    for (doc, v) in batch.iter().zip(&vectors) {
        if v.len() != dim {
            return Err(Error::Protocol(format!(
                "embedding for {} has dimension {}, expected {dim}",
                doc.doc_id,
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Protocol(format!("embedding for {} is not finite", doc.doc_id)));
        }
    }
    cache.insert_all(batch.iter().map(|d| d.doc_id.clone()).zip(vectors))
}

/// Pole log-scores for one dimension, one pair per document in input order.
pub fn pole_logscores(
    docs: &[DocumentRecord],
    dim_id: &str,
    low_label: &str,
    high_label: &str,
    backend: &dyn InferenceBackend,
    cfg: &BackendConfig,
) -> Result<Vec<PoleLogScores>> {
    require_docs(docs)?;
    cfg.validate()?;
    let batches: Vec<&[DocumentRecord]> = docs.chunks(cfg.batch_size).collect();
    let results = dispatch(&batches, cfg.max_in_flight, |batch| {
        with_retry(cfg, || backend.logscores(batch, dim_id, low_label, high_label))
    });
    let mut out = Vec::with_capacity(docs.len());
    for (i, res) in results {
        let batch = batches[i];
        let pairs = match res {
            Ok(p) => p,
            Err(e) => {
                let failed = batches[i..].iter().flat_map(|b| b.iter().map(|d| d.doc_id.clone())).collect();
                return Err(transport_failure(e, failed));
            }
        };
        if pairs.len() != batch.len() {
            return Err(Error::Protocol(format!(
                "backend returned {} log-score pairs for {} documents",
                pairs.len(),
                batch.len()
            )));
        }
        for (doc, (lo, hi)) in batch.iter().zip(pairs) {
            out.push(
                PoleLogScores::new(doc.doc_id.clone(), dim_id, lo, hi)
                    .map_err(|e| Error::Protocol(e.to_string()))?,
            );
        }
    }
    if out.len() != docs.len() {
        // dispatch stopped early without an error entry; cannot happen unless a wave was skipped
        return Err(Error::Protocol("incomplete log-score dispatch".into()));
    }
    Ok(out)
}

/// Centrality probe: the target label as high pole against the dictionary's
/// negative anchor as low pole.
pub fn centrality_logscores(
    docs: &[DocumentRecord],
    dict: &PositionalDictionary,
    backend: &dyn InferenceBackend,
    cfg: &BackendConfig,
) -> Result<Vec<PoleLogScores>> {
    let target = dict
        .centrality_target
        .as_deref()
        .ok_or_else(|| Error::Configuration(format!("dictionary {} has no centrality target", dict.dict_id)))?;
    pole_logscores(docs, CENTRALITY_DIM_ID, &dict.centrality_anchor, target, backend, cfg)
}
