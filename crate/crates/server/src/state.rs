use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use rob2_core::clock::{Clock, SystemClock};
use rob2_core::config::Settings;
use rob2_core::document::{DocId, TrialDocument};
use rob2_core::qa::{LlmClient, ModelAnswer};
use rob2_core::questionnaire::Questionnaire;
use rob2_core::retrieval::{Bm25Params, Embedder, ParagraphIndex};
use rob2_core::rob_logic::RuleSet;
use rob2_core::store::{FileStore, MemoryStore, SessionStore, StoreError, Workbench};
use serde::Serialize;

use crate::error::ApiError;

/// An ingested document with its retrieval index.
pub struct Indexed {
    pub doc: TrialDocument,
    pub index: ParagraphIndex,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobState {
    Pending { session_id: String, qid: String },
    Done { session_id: String, answer: Box<ModelAnswer> },
    Failed { session_id: String, error: ApiError },
}

/// Shared service state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

pub(crate) struct Inner {
    pub settings: Settings,
    pub questionnaire: Arc<Questionnaire>,
    pub workbench: Workbench,
    pub embedder: Box<dyn Embedder>,
    pub documents: RwLock<HashMap<DocId, Arc<Indexed>>>,
    pub document_dir: Option<PathBuf>,
    pub llms: Mutex<HashMap<String, Arc<dyn LlmClient>>>,
    pub jobs: Mutex<HashMap<String, JobState>>,
    pub next_job: AtomicU64,
}

impl AppState {
    /// State backed by `settings.data_dir` (sessions and documents on disk)
    /// or by memory when no directory is set.
    pub fn from_settings(settings: Settings) -> Result<Self, StoreError> {
        let store: Box<dyn SessionStore> = match &settings.data_dir {
            Some(dir) => Box::new(FileStore::open(dir.join("sessions"))?),
            None => Box::new(MemoryStore::new()),
        };
        let state = Self::new(settings, store, Arc::new(SystemClock));
        state.load_documents()?;
        Ok(state)
    }

    pub fn new(settings: Settings, store: Box<dyn SessionStore>, clock: Arc<dyn Clock>) -> Self {
        let questionnaire = Arc::new(Questionnaire::bundled());
        let workbench = Workbench::with_clock(questionnaire.clone(), Arc::new(RuleSet::bundled()), store, clock);
        let document_dir = settings.data_dir.as_ref().map(|d| d.join("documents"));
        AppState(Arc::new(Inner {
            embedder: settings.embedder(),
            settings,
            questionnaire,
            workbench,
            documents: RwLock::new(HashMap::new()),
            document_dir,
            llms: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
            next_job: AtomicU64::new(1),
        }))
    }

    /// Serves `client` for sessions whose model id equals its model id.
    pub fn with_llm(self, client: Arc<dyn LlmClient>) -> Self {
        self.0.llms.lock().expect("llm table poisoned").insert(client.model_id().to_owned(), client);
        self
    }

    pub fn workbench(&self) -> &Workbench {
        &self.0.workbench
    }

    pub fn questionnaire(&self) -> &Questionnaire {
        &self.0.questionnaire
    }

    pub fn settings(&self) -> &Settings {
        &self.0.settings
    }

    pub(crate) fn llm(&self, model: &str) -> Result<Arc<dyn LlmClient>, ApiError> {
        let mut table = self.0.llms.lock().expect("llm table poisoned");
        if let Some(c) = table.get(model) {
            return Ok(c.clone());
        }
        let client: Arc<dyn LlmClient> = Arc::from(self.0.settings.llm_client(Some(model))?);
        table.insert(model.to_owned(), client.clone());
        Ok(client)
    }

    pub(crate) fn document(&self, id: &DocId) -> Result<Arc<Indexed>, ApiError> {
        self.0
            .documents
            .read()
            .expect("document table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("document_not_found", format!("document {id} not found")))
    }

    /// Indexes and stores `doc`. Returns false when it was already present.
    pub(crate) fn insert_document(&self, doc: TrialDocument) -> Result<bool, ApiError> {
        if self.0.documents.read().expect("document table poisoned").contains_key(&doc.doc_id) {
            return Ok(false);
        }
        let index = ParagraphIndex::build(&doc, self.0.embedder.as_ref(), Bm25Params::default())?;
        if let Some(dir) = &self.0.document_dir {
            std::fs::create_dir_all(dir).map_err(|e| ApiError::internal(e.to_string()))?;
            std::fs::write(dir.join(format!("{}.json", doc.doc_id)), doc.to_json())
                .map_err(|e| ApiError::internal(e.to_string()))?;
        }
        let mut table = self.0.documents.write().expect("document table poisoned");
        Ok(table.insert(doc.doc_id.clone(), Arc::new(Indexed { doc, index })).is_none())
    }

    fn load_documents(&self) -> Result<(), StoreError> {
        let Some(dir) = &self.0.document_dir else { return Ok(()) };
        let Ok(entries) = std::fs::read_dir(dir) else { return Ok(()) };
        for entry in entries {
            let path = entry.map_err(|e| StoreError::Io(e.to_string()))?.path();
            let bytes = std::fs::read(&path).map_err(|e| StoreError::Io(e.to_string()))?;
            let doc = rob2_core::document::ingest_document(&bytes)
                .map_err(|e| StoreError::Malformed(format!("{}: {e}", path.display())))?;
            self.insert_document(doc).map_err(|e| StoreError::Io(e.message))?;
        }
        Ok(())
    }

    pub(crate) fn new_job(&self, session_id: &str, qid: &str) -> String {
        let id = format!("job-{}", self.0.next_job.fetch_add(1, Ordering::SeqCst));
        self.set_job(&id, JobState::Pending { session_id: session_id.to_owned(), qid: qid.to_owned() });
        id
    }

    pub(crate) fn set_job(&self, id: &str, state: JobState) {
        self.0.jobs.lock().expect("job table poisoned").insert(id.to_owned(), state);
    }

    pub(crate) fn job(&self, id: &str) -> Option<JobState> {
        self.0.jobs.lock().expect("job table poisoned").get(id).cloned()
    }
}
