use std::path::PathBuf;

use rob2_core::dataset::{DatasetError, DOWNLOAD_HINT};
use rob2_core::document::DocumentError;
use rob2_core::evaluation::EvaluationError;
use rob2_core::qa::LlmError;
use rob2_core::retrieval::RetrievalError;
use rob2_core::store::StoreError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Document {
        path: PathBuf,
        #[source]
        source: DocumentError,
    },
    #[error("document {0} is neither ingested nor part of the dataset")]
    UnknownDocument(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("no benchmark runs in {0}")]
    NoRuns(PathBuf),
    #[error("every question failed; first error: {0}")]
    AllFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, e: impl ToString) -> Self {
        CliError::Io { path: path.into(), message: e.to_string() }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Dataset(DatasetError::Missing { .. }) => "dataset_missing",
            CliError::Dataset(_) => "dataset_invalid",
            CliError::Document { .. } => "malformed_document",
            CliError::UnknownDocument(_) => "document_not_found",
            CliError::Store(_) => "session",
            CliError::Llm(_) => "llm",
            CliError::Retrieval(_) => "retrieval",
            CliError::Evaluation(_) => "evaluation",
            CliError::NoRuns(_) => "no_runs",
            CliError::AllFailed(_) => "all_failed",
        }
    }

    /// What the operator can do about it.
    pub fn hint(&self) -> Option<&'static str> {
        match self {
            CliError::Dataset(DatasetError::Missing { .. }) => Some(DOWNLOAD_HINT),
            CliError::UnknownDocument(_) => Some("run `rob2 ingest <file>` or pass --dataset"),
            CliError::NoRuns(_) => Some("run `rob2 eval qa` first or pass --runs"),
            CliError::Llm(LlmError::Config(_)) => Some("set LLM_BASE_URL and LLM_MODEL, or use --model stub"),
            _ => None,
        }
    }

    /// One-line JSON object written to stderr.
    pub fn to_json(&self) -> String {
        let mut err = json!({ "code": self.code(), "message": self.to_string() });
        if let Some(h) = self.hint() {
            err["hint"] = h.into();
        }
        json!({ "error": err }).to_string()
    }
}
