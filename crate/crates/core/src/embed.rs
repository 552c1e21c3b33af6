//! Sentence embeddings behind a pluggable backend, with a content-addressed cache.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{tokenize, Corpus, NormalizationRules};
use crate::http::{HttpConfig, JsonEndpoint, TransportError};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding backend failed for {} sentence(s) ({}): {source}", failed_ids.len(), failed_ids.join(", "))]
    Transport {
        failed_ids: Vec<String>,
        #[source]
        source: TransportError,
    },
    #[error("sentence {id:?}: expected dimension {expected}, got {got}")]
    DimensionMismatch { id: String, expected: usize, got: usize },
    #[error("backend returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedding cache {path}: {message}")]
    Cache { path: String, message: String },
}

pub trait EmbeddingBackend: Sync {
    /// Identifies the backend and model in cache keys.
    fn cache_key(&self) -> String;
    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, TransportError>;
}

/// Deterministic feature-hashing embedder for offline runs.
///
/// Each normalized word adds ±1 to one hashed coordinate; the sum is L2
/// normalized. Sentences sharing words land close together.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl MockEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim: dim.max(1), seed }
    }

    fn vector(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for tok in tokenize(text, &NormalizationRules::default()) {
            let mut h = Sha256::new();
            h.update(self.seed.to_le_bytes());
            h.update(tok.as_bytes());
            let d = h.finalize();
            let idx = u64::from_le_bytes(d[..8].try_into().unwrap()) as usize % self.dim;
            let sign = if d[8] & 1 == 0 { 1.0 } else { -1.0 };
            v[idx] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl EmbeddingBackend for MockEmbedder {
    fn cache_key(&self) -> String {
        format!("mock:{}:{}", self.dim, self.seed)
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, TransportError> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpEmbedderConfig {
    #[serde(flatten)]
    pub http: HttpConfig,
    pub model: String,
    pub batch_size: usize,
}

impl Default for HttpEmbedderConfig {
    fn default() -> Self {
        Self {
            http: HttpConfig::default(),
            model: String::new(),
            batch_size: 64,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// `{"texts": [..]}` → `{"vectors": [[..]]}` over HTTP.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: JsonEndpoint,
    model: String,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbedderConfig) -> Result<Self, TransportError> {
        Ok(Self {
            endpoint: JsonEndpoint::new(config.http)?,
            model: config.model,
        })
    }
}

impl EmbeddingBackend for HttpEmbedder {
    fn cache_key(&self) -> String {
        format!("http:{}:{}", self.endpoint.config().endpoint, self.model)
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, TransportError> {
        let resp: EmbedResponse = self.endpoint.post_json(&EmbedRequest { texts })?;
        Ok(resp.vectors)
    }
}

/// One file per (backend, text) pair, named by the SHA-256 of both.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path(&self, backend: &str, text: &str) -> PathBuf {
        let mut h = Sha256::new();
        h.update(backend.as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        self.dir.join(format!("{}.json", hex::encode(h.finalize())))
    }

    pub fn get(&self, backend: &str, text: &str) -> Option<Vec<f64>> {
        let bytes = fs::read(self.path(backend, text)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn put(&self, backend: &str, text: &str, v: &[f64]) -> Result<(), EmbedError> {
        let err = |p: &Path, e: std::io::Error| EmbedError::Cache {
            path: p.display().to_string(),
            message: e.to_string(),
        };
        fs::create_dir_all(&self.dir).map_err(|e| err(&self.dir, e))?;
        let path = self.path(backend, text);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(v).expect("vector serializes")).map_err(|e| err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| err(&path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub dim: usize,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, EmbedError> {
        let dim = rows.first().map_or(0, Vec::len);
        for (id, r) in ids.iter().zip(&rows) {
            if r.len() != dim {
                return Err(EmbedError::DimensionMismatch {
                    id: id.clone(),
                    expected: dim,
                    got: r.len(),
                });
            }
        }
        assert_eq!(ids.len(), rows.len(), "one row per id");
        Ok(Self { ids, rows, dim })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub const EMBED_BATCH: usize = 64;

/// Embeds every sentence of `corpus`, serving cached rows without backend calls.
pub fn embed(
    corpus: &Corpus,
    backend: &dyn EmbeddingBackend,
    cache: Option<&EmbeddingCache>,
) -> Result<EmbeddingMatrix, EmbedError> {
    let key = backend.cache_key();
    let mut rows: Vec<Option<Vec<f64>>> = corpus
        .iter()
        .map(|s| cache.and_then(|c| c.get(&key, &s.raw_text)))
        .collect();
    let missing: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].is_none()).collect();
    for batch in missing.chunks(EMBED_BATCH) {
        let texts: Vec<&str> = batch.iter().map(|&i| corpus.sentences[i].raw_text.as_str()).collect();
        let vectors = backend.embed_texts(&texts).map_err(|source| EmbedError::Transport {
            failed_ids: batch.iter().map(|&i| corpus.sentences[i].id.clone()).collect(),
            source,
        })?;
        if vectors.len() != batch.len() {
            return Err(EmbedError::CountMismatch {
                expected: batch.len(),
                got: vectors.len(),
            });
        }
        for (&i, v) in batch.iter().zip(vectors) {
            if let Some(c) = cache {
                c.put(&key, &corpus.sentences[i].raw_text, &v)?;
            }
            rows[i] = Some(v);
        }
    }
    EmbeddingMatrix::new(
        corpus.iter().map(|s| s.id.clone()).collect(),
        rows.into_iter().map(|r| r.expect("all rows filled")).collect(),
    )
}
