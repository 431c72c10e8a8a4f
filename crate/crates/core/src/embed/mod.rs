//! Sentence embeddings behind a provider interface.
//!
//! Three backends implement [`EmbeddingProvider`]: a deterministic mock, an
//! append-only file cache (optionally falling back to another provider), and a
//! client for the HTTP embedding service. Everything that crosses a provider
//! boundary through [`embed_batch`] is checked for count and dimension and
//! renormalized to unit length.

mod cache;
mod mock;
mod remote;

pub use cache::{cache_key, CacheStats, CachedProvider, FileCache, CACHE_FORMAT_VERSION};
pub use mock::{mock_embed, mock_embed_dim, noisy_copy, random_unit, MockAlias, MockProvider};
pub use remote::{EmbedHttpRequest, EmbedHttpResponse, HealthResponse, RemoteConfig, RemoteProvider};

use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::lang::LanguageCode;

/// Output dimension of the reference multilingual encoder.
pub const DEFAULT_DIMENSION: usize = 768;
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding provider at {endpoint} unavailable after {attempts} attempts: {reason}")]
    ProviderUnavailable {
        endpoint: String,
        attempts: usize,
        reason: String,
    },
    #[error("expected {expected}-dimensional vectors, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no cached embedding for {text:?}")]
    CacheMiss { text: String },
    #[error("corrupt cache entry at byte {offset}: {reason}")]
    CorruptEntry { offset: u64, reason: String },
    #[error("embedding batch is empty")]
    EmptyBatch,
    #[error("text {index} of the batch is empty")]
    EmptyText { index: usize },
    #[error("provider returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("vector is zero or contains non-finite values")]
    InvalidVector,
    #[error("provider protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A unit-length embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Normalizes `values` to unit length. Fails on empty, zero or non-finite input.
    pub fn normalized(values: &[f64]) -> Result<Self, EmbedError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::InvalidVector);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(EmbedError::InvalidVector);
        }
        Ok(EmbeddingVector(
            values.iter().map(|v| (v / norm) as f32).collect(),
        ))
    }

    pub fn from_f32(values: &[f32]) -> Result<Self, EmbedError> {
        let wide: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
        EmbeddingVector::normalized(&wide)
    }

    /// Wraps stored values verbatim. Used by the cache, which only ever holds
    /// vectors that were normalized before they were written.
    pub(crate) fn from_stored(values: Vec<f32>) -> Self {
        EmbeddingVector(values)
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|v| v.is_finite()) && (self.norm() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingBatch {
    pub texts: Vec<String>,
    pub language: Option<LanguageCode>,
}

impl EmbeddingBatch {
    pub fn new(texts: Vec<String>, language: Option<LanguageCode>) -> Result<Self, EmbedError> {
        if texts.is_empty() {
            return Err(EmbedError::EmptyBatch);
        }
        if let Some(index) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText { index });
        }
        Ok(EmbeddingBatch { texts, language })
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;

    fn dimension(&self) -> usize;

    /// Raw provider call. Callers should go through [`embed_batch`], which
    /// enforces the boundary contract.
    fn embed(&self, batch: &EmbeddingBatch) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn embed(&self, batch: &EmbeddingBatch) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed(batch)
    }
}

/// Embeds a batch and checks the result: one vector per text in order, each of
/// the provider's dimension, finite, and renormalized to unit length.
pub fn embed_batch<P: EmbeddingProvider + ?Sized>(
    batch: &EmbeddingBatch,
    provider: &P,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    let vectors = provider.embed(batch)?;
    if vectors.len() != batch.len() {
        return Err(EmbedError::CountMismatch {
            expected: batch.len(),
            got: vectors.len(),
        });
    }
    let expected = provider.dimension();
    vectors
        .into_iter()
        .map(|v| {
            if v.dim() != expected {
                return Err(EmbedError::DimensionMismatch {
                    expected,
                    got: v.dim(),
                });
            }
            if v.is_unit() {
                Ok(v)
            } else {
                EmbeddingVector::from_f32(v.values())
            }
        })
        .collect()
}

/// Embeds an arbitrary list of texts in chunks of `batch_size`.
pub fn embed_texts<P: EmbeddingProvider + ?Sized>(
    texts: &[String],
    language: Option<LanguageCode>,
    provider: &P,
    batch_size: usize,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    let mut out = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(batch_size.max(1)) {
        let batch = EmbeddingBatch::new(chunk.to_vec(), language)?;
        out.extend(embed_batch(&batch, provider)?);
    }
    Ok(out)
}

/// NFC-normalized text with whitespace runs collapsed to single spaces.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// First eight bytes of SHA-256, little-endian. Platform independent.
pub fn stable_hash64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
