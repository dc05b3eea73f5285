//! Within-document paragraph retrieval.
//!
//! Each [`ParagraphIndex`] covers one trial report. It holds BM25 term
//! statistics computed over that report's paragraphs only, and one
//! unit-normalized embedding per paragraph for cosine ranking.

mod bm25;
mod embed;
mod index;
mod recall;

pub use bm25::{tokenize, Bm25Params};
pub use embed::{
    Embedder, EmbedError, HashEmbedder, HttpEmbedder, SidecarVectors, HASH_EMBEDDER_DIM,
    HASH_EMBEDDER_MODEL,
};
pub use index::{ParagraphIndex, RetrievalResult};
pub use recall::{recall_at_k, RankedQuestion};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("embedding paragraph {paragraph}: {source}")]
    IndexBuild {
        paragraph: usize,
        #[source]
        source: EmbedError,
    },
    #[error("embedding query: {0}")]
    Query(#[source] EmbedError),
    #[error("index was built with embedder {index_model:?} but query uses {query_model:?}")]
    ModelMismatch { index_model: String, query_model: String },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("sidecar has no vector for {doc_id} paragraph {paragraph}")]
    MissingVector { doc_id: String, paragraph: usize },
}

/// Which ranking function feeds the QA module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrieverKind {
    #[default]
    Embedding,
    Bm25,
}

impl std::str::FromStr for RetrieverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "embedding" | "sbert" | "dense" => Ok(RetrieverKind::Embedding),
            "bm25" | "sparse" => Ok(RetrieverKind::Bm25),
            other => Err(format!("unknown retriever {other:?}")),
        }
    }
}
