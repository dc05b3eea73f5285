use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clock::{Clock, SystemClock};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("LLM endpoint unreachable: {0}")]
    Transport(String),
    #[error("LLM endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed LLM response: {0}")]
    Malformed(String),
    #[error("LLM configuration: {0}")]
    Config(String),
}

/// Decoding settings sent with every request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Upper bound on rendered prompt length, in characters. Prompts over the
    /// budget fail instead of being truncated.
    #[serde(default)]
    pub context_budget_chars: Option<usize>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig { temperature: 0.0, max_output_tokens: 512, context_budget_chars: None }
    }
}

/// A completion endpoint. Implementations must tolerate concurrent callers.
pub trait LlmClient: Send + Sync {
    fn model_id(&self) -> &str;

    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, LlmError>;
}

impl<T: LlmClient + ?Sized> LlmClient for Arc<T> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, LlmError> {
        (**self).complete(prompt, config)
    }
}

/// Client for OpenAI-compatible `/chat/completions` endpoints.
pub struct ChatCompletionsClient {
    base_url: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

impl ChatCompletionsClient {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        ChatCompletionsClient {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            model: model.into(),
            api_key,
            agent,
        }
    }

    /// Reads `LLM_BASE_URL`, `LLM_MODEL` and `LLM_API_KEY`. `model` overrides
    /// `LLM_MODEL` when given.
    pub fn from_env(model: Option<&str>) -> Result<Self, LlmError> {
        let base = std::env::var("LLM_BASE_URL").map_err(|_| LlmError::Config("LLM_BASE_URL is not set".into()))?;
        let model = match model {
            Some(m) => m.to_owned(),
            None => std::env::var("LLM_MODEL").map_err(|_| LlmError::Config("LLM_MODEL is not set".into()))?,
        };
        let key = std::env::var("LLM_API_KEY").ok().filter(|k| !k.is_empty());
        Ok(Self::new(base, model, key, Duration::from_secs(300)))
    }
}

impl LlmClient for ChatCompletionsClient {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, LlmError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
        });
        let mut req = self.agent.post(format!("{}/chat/completions", self.base_url));
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(LlmError::Status { status, body: text });
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| LlmError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Malformed("no choices in response".into()))
    }
}

type Responder = dyn Fn(&str) -> Result<String, LlmError> + Send + Sync;

/// Deterministic offline model for tests and dry runs.
pub struct StubLlm {
    model: String,
    responder: Box<Responder>,
    calls: AtomicUsize,
}

impl StubLlm {
    pub fn fixed(model: impl Into<String>, response: impl Into<String>) -> Self {
        let response = response.into();
        Self::from_fn(model, move |_| Ok(response.clone()))
    }

    pub fn from_fn(
        model: impl Into<String>,
        f: impl Fn(&str) -> Result<String, LlmError> + Send + Sync + 'static,
    ) -> Self {
        StubLlm { model: model.into(), responder: Box::new(f), calls: AtomicUsize::new(0) }
    }

    /// Answers by looking up the quoted question text of the target question
    /// (the last `Question: "..."` line of the prompt).
    pub fn by_question(model: impl Into<String>, answers: HashMap<String, String>, fallback: impl Into<String>) -> Self {
        let fallback = fallback.into();
        Self::from_fn(model, move |prompt| {
            let question = prompt
                .rsplit("Question: \"")
                .next()
                .and_then(|rest| rest.split("\"\n").next())
                .unwrap_or("");
            Ok(answers.get(question).cloned().unwrap_or_else(|| fallback.clone()))
        })
    }

    /// Picks a response option from the SHA-256 of the prompt, so runs are
    /// reproducible on any platform.
    pub fn hashed(model: impl Into<String>) -> Self {
        Self::from_fn(model, |prompt| {
            let h = Sha256::digest(prompt.as_bytes());
            let answer = crate::questionnaire::Answer::RESPONSES[h[0] as usize % 5];
            Ok(format!("{}. Stub rationale {}.", answer.label(), hex::encode(&h[..4])))
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmClient for StubLlm {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str, _config: &GenerationConfig) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.responder)(prompt)
    }
}

/// Writes every request and response to a JSON-lines sink.
pub struct AuditedClient<C> {
    inner: C,
    sink: Mutex<Box<dyn Write + Send>>,
    clock: Arc<dyn Clock>,
}

impl<C: LlmClient> AuditedClient<C> {
    pub fn new(inner: C, sink: Box<dyn Write + Send>) -> Self {
        Self::with_clock(inner, sink, Arc::new(SystemClock))
    }

    pub fn with_clock(inner: C, sink: Box<dyn Write + Send>, clock: Arc<dyn Clock>) -> Self {
        AuditedClient { inner, sink: Mutex::new(sink), clock }
    }

    /// Appends to the file at `path`, creating it if needed.
    pub fn to_file(inner: C, path: impl AsRef<Path>) -> std::io::Result<Self> {
        if let Some(parent) = path.as_ref().parent() {
            std::fs::create_dir_all(parent)?;
        }
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self::new(inner, Box::new(f)))
    }
}

impl<C: LlmClient> LlmClient for AuditedClient<C> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, LlmError> {
        let requested_at = self.clock.now();
        let started = Instant::now();
        let result = self.inner.complete(prompt, config);
        let entry = json!({
            "requested_at": requested_at.to_rfc3339(),
            "responded_at": self.clock.now().to_rfc3339(),
            "elapsed_ms": started.elapsed().as_millis() as u64,
            "model": self.inner.model_id(),
            "request": {
                "prompt": prompt,
                "temperature": config.temperature,
                "max_output_tokens": config.max_output_tokens,
            },
            "response": result.as_ref().ok(),
            "error": result.as_ref().err().map(|e| e.to_string()),
        });
        let mut sink = self.sink.lock().expect("audit sink poisoned");
        // An unwritable audit log must not hide the model's answer.
        let _ = writeln!(sink, "{entry}").and_then(|_| sink.flush());
        result
    }
}

/// SHA-256 over model, decoding settings and prompt.
pub fn prompt_digest(model: &str, prompt: &str, config: &GenerationConfig) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0]);
    h.update(config.temperature.to_le_bytes());
    h.update(config.max_output_tokens.to_le_bytes());
    h.update([0]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    model: String,
    response: String,
}

/// Append-only JSON-lines cache of raw responses, so re-scoring a run never
/// queries the model again.
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, String>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache { path: None, entries: Mutex::new(HashMap::new()) }
    }

    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheLine = serde_json::from_str(&line)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
                entries.insert(entry.key, entry.response);
            }
        }
        Ok(ResponseCache { path: Some(path), entries: Mutex::new(entries) })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cached response for this prompt, or a fresh call whose result is
    /// stored before returning.
    pub fn complete(&self, llm: &dyn LlmClient, prompt: &str, config: &GenerationConfig) -> Result<String, LlmError> {
        let key = prompt_digest(llm.model_id(), prompt, config);
        if let Some(hit) = self.entries.lock().expect("cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let response = llm.complete(prompt, config)?;
        let mut entries = self.entries.lock().expect("cache poisoned");
        if let Some(path) = &self.path {
            let line = serde_json::to_string(&CacheLine {
                key: key.clone(),
                model: llm.model_id().to_owned(),
                response: response.clone(),
            })
            .expect("cache line serializes");
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| LlmError::Transport(format!("response cache: {e}")))?;
            writeln!(f, "{line}").map_err(|e| LlmError::Transport(format!("response cache: {e}")))?;
        }
        entries.insert(key, response.clone());
        Ok(response)
    }
}
