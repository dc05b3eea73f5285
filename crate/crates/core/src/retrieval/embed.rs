use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bm25::tokenize;
use crate::document::DocId;
use crate::questionnaire::Qid;

pub const HASH_EMBEDDER_DIM: usize = 64;
pub const HASH_EMBEDDER_MODEL: &str = "hash-bow-64";

const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding service: {0}")]
    Transport(String),
    #[error("embedding service returned {got} vectors for {expected} texts")]
    Count { expected: usize, got: usize },
    #[error("embedding has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("no precomputed vector for {0}")]
    Missing(String),
}

/// Maps text to unit-norm vectors of a fixed dimension.
///
/// Implementations are deterministic for a given `(model_id, text)` and must
/// be usable from several threads at once.
pub trait Embedder: Send + Sync {
    fn model_id(&self) -> &str;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError>;

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        out.pop().ok_or(EmbedError::Count { expected: 1, got: 0 })
    }
}

pub(crate) fn normalize(mut v: Vec<f32>) -> Result<Vec<f32>, EmbedError> {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(EmbedError::ZeroNorm);
    }
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        for x in &mut v {
            *x = (*x as f64 / norm) as f32;
        }
    }
    Ok(v)
}

/// Offline embedder: hashed bag of words projected to 64 signed buckets,
/// then L2-normalized. Token counts scale linearly, so repeating a text does
/// not change its direction.
#[derive(Debug, Clone, Default)]
pub struct HashEmbedder;

impl HashEmbedder {
    fn fnv1a(bytes: &[u8]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    fn embed_one(text: &str) -> Result<Vec<f32>, EmbedError> {
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            tokens.push(text.trim().to_owned());
        }
        let mut v = vec![0f32; HASH_EMBEDDER_DIM];
        for t in &tokens {
            let h = Self::fnv1a(t.as_bytes());
            let bucket = (h % HASH_EMBEDDER_DIM as u64) as usize;
            let sign = if (h >> 32) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        normalize(v)
    }
}

impl Embedder for HashEmbedder {
    fn model_id(&self) -> &str {
        HASH_EMBEDDER_MODEL
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        texts.iter().map(|t| Self::embed_one(t)).collect()
    }
}

/// Client for an embedding service speaking
/// `POST {model, texts} -> {vectors}`.
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .new_agent();
        HttpEmbedder { endpoint: endpoint.into(), model: model.into(), api_key, agent }
    }
}

impl Embedder for HttpEmbedder {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let resp: EmbedResponse = req
            .send_json(EmbedRequest { model: &self.model, texts })
            .map_err(|e| EmbedError::Transport(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        if resp.vectors.len() != texts.len() {
            return Err(EmbedError::Count { expected: texts.len(), got: resp.vectors.len() });
        }
        let dim = resp.vectors.first().map(Vec::len).unwrap_or(0);
        resp.vectors
            .into_iter()
            .map(|v| {
                if v.len() != dim {
                    return Err(EmbedError::Dimension { expected: dim, got: v.len() });
                }
                normalize(v)
            })
            .collect()
    }
}

/// Precomputed reference vectors keyed by `(doc_id, paragraph_index)` for
/// paragraphs and by qid for the signaling-question queries.
///
/// File layout:
/// `{"model_id": ..., "paragraphs": [{"doc_id", "paragraph_index", "vector"}],
///   "queries": [{"qid", "vector"}]}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SidecarVectors {
    pub model_id: String,
    pub paragraphs: Vec<ParagraphVector>,
    #[serde(default)]
    pub queries: Vec<QueryVector>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParagraphVector {
    pub doc_id: DocId,
    pub paragraph_index: usize,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryVector {
    pub qid: Qid,
    pub vector: Vec<f32>,
}

impl SidecarVectors {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| EmbedError::Transport(format!("{}: {e}", path.as_ref().display())))?;
        serde_json::from_str(&text).map_err(|e| EmbedError::Transport(format!("sidecar: {e}")))
    }

    /// Paragraph vectors of one document, ordered by paragraph index.
    pub fn document(&self, doc_id: &DocId) -> BTreeMap<usize, &[f32]> {
        self.paragraphs
            .iter()
            .filter(|p| &p.doc_id == doc_id)
            .map(|p| (p.paragraph_index, p.vector.as_slice()))
            .collect()
    }

    pub fn query(&self, qid: Qid) -> Option<&[f32]> {
        self.queries.iter().find(|q| q.qid == qid).map(|q| q.vector.as_slice())
    }
}
