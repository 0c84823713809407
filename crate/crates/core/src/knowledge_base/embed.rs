use std::marker::PhantomData;

use md5::{Digest, Md5};
use serde_json::json;

use super::KbError;
use crate::model_gateway::{post_json, BackendConfig};
use crate::Scalar;

pub const HASHING_DIMENSION: usize = 256;

/// Text to fixed-dimension vector.
pub trait Embedder<F: Scalar>: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<F>, KbError>;
}

impl<F: Scalar, E: Embedder<F> + ?Sized> Embedder<F> for &E {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn embed(&self, text: &str) -> Result<Vec<F>, KbError> {
        (**self).embed(text)
    }
}

impl<F: Scalar, E: Embedder<F> + ?Sized> Embedder<F> for Box<E> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn embed(&self, text: &str) -> Result<Vec<F>, KbError> {
        (**self).embed(text)
    }
}

/// Deterministic offline embedder (signed feature hashing).
///
/// 1. Lowercase the text and split it into maximal runs of alphanumeric
///    characters; `_` and every other symbol separate tokens.
/// 2. Drop a trailing `s` from tokens longer than three characters.
/// 3. For each token take `h = md5(token)`; bucket = first four bytes
///    (little-endian) mod dimension, sign = low bit of byte 4.
/// 4. Add ±1 per occurrence, then scale to unit length. Text without tokens
///    maps to the all-zero vector, left unnormalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dimension: HASHING_DIMENSION }
    }
}

impl HashingEmbedder {
    pub fn with_dimension(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashingEmbedder { dimension }
    }

    pub fn tokens(text: &str) -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| match t.strip_suffix('s') {
                Some(stem) if t.chars().count() > 3 => stem.to_string(),
                _ => t.to_string(),
            })
            .collect()
    }

    fn counts(&self, text: &str) -> Vec<i64> {
        let mut counts = vec![0i64; self.dimension];
        for token in Self::tokens(text) {
            let h = Md5::digest(token.as_bytes());
            let bucket = u32::from_le_bytes([h[0], h[1], h[2], h[3]]) as usize % self.dimension;
            counts[bucket] += if h[4] & 1 == 0 { 1 } else { -1 };
        }
        counts
    }
}

impl<F: Scalar> Embedder<F> for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<F>, KbError> {
        let counts = self.counts(text);
        let norm = (counts.iter().map(|c| (c * c) as f64).sum::<f64>()).sqrt();
        if norm == 0.0 {
            return Ok(vec![F::zero(); self.dimension]);
        }
        Ok(counts.iter().map(|&c| F::of(c as f64 / norm)).collect())
    }
}

/// Embeddings from an OpenAI-compatible `/embeddings` endpoint.
#[derive(Debug, Clone)]
pub struct LiveEmbedder<F> {
    config: BackendConfig,
    dimension: usize,
    _scalar: PhantomData<fn() -> F>,
}

impl<F: Scalar> LiveEmbedder<F> {
    /// Probes the endpoint once to learn the dimension.
    pub fn new(config: BackendConfig) -> Result<Self, KbError> {
        let mut embedder = LiveEmbedder { config, dimension: 0, _scalar: PhantomData };
        embedder.dimension = embedder.request("dimension probe")?.len();
        Ok(embedder)
    }

    pub fn from_env() -> Result<Self, KbError> {
        Self::new(BackendConfig::embedding_from_env()?)
    }

    fn request(&self, text: &str) -> Result<Vec<F>, KbError> {
        let body = json!({"model": self.config.model, "input": text});
        let mut attempt = 0;
        let value = loop {
            match post_json(&self.config, "/embeddings", &body) {
                Err(e) if e.is_transient() && attempt < self.config.retry_budget => attempt += 1,
                other => break other?,
            }
        };
        let values = value["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| KbError::Embedding("response has no data[0].embedding".into()))?;
        values
            .iter()
            .map(|v| v.as_f64().map(F::of).ok_or_else(|| KbError::Embedding("non-numeric embedding value".into())))
            .collect()
    }
}

impl<F: Scalar> Embedder<F> for LiveEmbedder<F> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<F>, KbError> {
        let v = self.request(text)?;
        if v.len() != self.dimension {
            return Err(KbError::DimensionMismatch { expected: self.dimension, found: v.len() });
        }
        Ok(v)
    }
}
