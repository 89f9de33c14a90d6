use crate::text::tokens;
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `raw`; `None` for a zero vector.
    pub fn from_raw(raw: Vec<f64>) -> Option<Self> {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(Self(raw.into_iter().map(|x| x / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Cosine of two unit vectors.
pub fn cosine(a: &Embedding, b: &Embedding) -> f64 {
    a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum()
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("embedding service error: {0}")]
    Service(String),
    #[error("embedding has dimension {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;
}

/// Hashed bag of tokens: every lowercase alphanumeric token adds one to the
/// bucket chosen by its FNV-1a hash.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim }
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dim as u64) as usize
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        format!("test-hash-{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let toks = tokens(text);
        if toks.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut v = vec![0.0; self.dim];
        for t in &toks {
            v[self.bucket(t)] += 1.0;
        }
        Embedding::from_raw(v).ok_or(EmbedError::EmptyText)
    }
}

/// Remote embedder: POSTs `{"input": text}` and accepts either
/// `{"embedding": [...]}` or `{"data": [{"embedding": [...]}]}`.
pub struct HttpEmbedder {
    endpoint: String,
    dim: usize,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(endpoint: &str, dim: usize, api_key: Option<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        Self {
            endpoint: endpoint.to_string(),
            dim,
            api_key,
            agent: config.into(),
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    embedding: Option<Vec<f64>>,
    data: Option<Vec<EmbeddingDatum>>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        if tokens(text).is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(serde_json::json!({ "input": text }))
            .map_err(|e| EmbedError::Service(e.to_string()))?;
        let body: EmbeddingResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Service(e.to_string()))?;
        let raw = body
            .embedding
            .or_else(|| {
                body.data
                    .and_then(|d| d.into_iter().next())
                    .map(|d| d.embedding)
            })
            .ok_or_else(|| EmbedError::Service("response has no embedding".into()))?;
        if raw.len() != self.dim {
            return Err(EmbedError::Dimension {
                got: raw.len(),
                expected: self.dim,
            });
        }
        Embedding::from_raw(raw).ok_or_else(|| EmbedError::Service("zero embedding".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_text_has_unit_cosine() {
        let e = HashEmbedder::default();
        let a = e.embed("Grab Apple").unwrap();
        let b = e.embed("grab apple").unwrap();
        assert!((cosine(&a, &b) - 1.0).abs() < 1e-12);
        let norm: f64 = a.as_slice().iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_text_is_rejected() {
        assert_eq!(
            HashEmbedder::default().embed(" .,; ").unwrap_err(),
            EmbedError::EmptyText
        );
    }
}
