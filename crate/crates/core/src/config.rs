//! Runtime settings shared by the service and the command line.

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::qa::{ChatCompletionsClient, LlmClient, LlmError, StubLlm};
use crate::retrieval::{Embedder, HashEmbedder, HttpEmbedder};

/// Model name that selects the offline [`StubLlm::hashed`] model.
pub const STUB_MODEL: &str = "stub";
/// Embedding model name that selects [`HashEmbedder`].
pub const HASH_EMBEDDING: &str = "hash";

/// Every field is optional so that layers can be overlaid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub data_dir: Option<PathBuf>,
    pub bind: Option<String>,
    pub llm_base_url: Option<String>,
    pub llm_model: Option<String>,
    pub llm_api_key: Option<String>,
    pub embedding_url: Option<String>,
    pub embedding_model: Option<String>,
    pub embedding_api_key: Option<String>,
    /// Seconds to wait for a model answer before answering 202.
    pub answer_timeout_secs: Option<u64>,
}

impl Settings {
    /// Variables: `ROB2_DATA_DIR`, `ROB2_BIND`, `LLM_BASE_URL`, `LLM_MODEL`,
    /// `LLM_API_KEY`, `EMBEDDING_URL`, `EMBEDDING_MODEL`,
    /// `EMBEDDING_API_KEY`, `ROB2_ANSWER_TIMEOUT_SECS`.
    pub fn from_env() -> Self {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Self {
        let get = |k: &str| get(k).filter(|v| !v.is_empty());
        Settings {
            data_dir: get("ROB2_DATA_DIR").map(PathBuf::from),
            bind: get("ROB2_BIND"),
            llm_base_url: get("LLM_BASE_URL"),
            llm_model: get("LLM_MODEL"),
            llm_api_key: get("LLM_API_KEY"),
            embedding_url: get("EMBEDDING_URL"),
            embedding_model: get("EMBEDDING_MODEL"),
            embedding_api_key: get("EMBEDDING_API_KEY"),
            answer_timeout_secs: get("ROB2_ANSWER_TIMEOUT_SECS").and_then(|v| v.parse().ok()),
        }
    }

    /// Fields set in `higher` win.
    pub fn overlay(self, higher: Settings) -> Settings {
        Settings {
            data_dir: higher.data_dir.or(self.data_dir),
            bind: higher.bind.or(self.bind),
            llm_base_url: higher.llm_base_url.or(self.llm_base_url),
            llm_model: higher.llm_model.or(self.llm_model),
            llm_api_key: higher.llm_api_key.or(self.llm_api_key),
            embedding_url: higher.embedding_url.or(self.embedding_url),
            embedding_model: higher.embedding_model.or(self.embedding_model),
            embedding_api_key: higher.embedding_api_key.or(self.embedding_api_key),
            answer_timeout_secs: higher.answer_timeout_secs.or(self.answer_timeout_secs),
        }
    }

    pub fn answer_timeout(&self) -> Duration {
        Duration::from_secs(self.answer_timeout_secs.unwrap_or(60))
    }

    /// Client for `model`, falling back to `llm_model`. The name `stub`
    /// needs no endpoint.
    pub fn llm_client(&self, model: Option<&str>) -> Result<Box<dyn LlmClient>, LlmError> {
        let model = model
            .or(self.llm_model.as_deref())
            .ok_or_else(|| LlmError::Config("no model given and LLM_MODEL is not set".into()))?;
        if model == STUB_MODEL {
            return Ok(Box::new(StubLlm::hashed(STUB_MODEL)));
        }
        let base = self
            .llm_base_url
            .as_deref()
            .ok_or_else(|| LlmError::Config(format!("LLM_BASE_URL is not set (needed for model {model:?})")))?;
        Ok(Box::new(ChatCompletionsClient::new(base, model, self.llm_api_key.clone(), Duration::from_secs(300))))
    }

    /// The configured embedding service, or [`HashEmbedder`] when none is
    /// set or the model is `hash`.
    pub fn embedder(&self) -> Box<dyn Embedder> {
        match (&self.embedding_url, &self.embedding_model) {
            (Some(url), Some(model)) if model != HASH_EMBEDDING => {
                Box::new(HttpEmbedder::new(url.clone(), model.clone(), self.embedding_api_key.clone()))
            }
            _ => Box::new(HashEmbedder),
        }
    }
}
