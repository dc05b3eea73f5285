use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::session::{AssessmentSession, LoggedEvent};
use super::StoreError;

/// Persistence for sessions. `append` journals the event before the snapshot
/// is replaced, so a crash never leaves a snapshot ahead of its log.
pub trait SessionStore: Send + Sync {
    fn append(&self, event: &LoggedEvent, snapshot: &AssessmentSession) -> Result<(), StoreError>;

    fn load(&self, session_id: &str) -> Result<Option<AssessmentSession>, StoreError>;

    fn events(&self, session_id: &str) -> Result<Vec<LoggedEvent>, StoreError>;

    fn list(&self) -> Result<Vec<String>, StoreError>;
}

#[derive(Default)]
pub struct MemoryStore {
    inner: Mutex<BTreeMap<String, (Vec<LoggedEvent>, AssessmentSession)>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SessionStore for MemoryStore {
    fn append(&self, event: &LoggedEvent, snapshot: &AssessmentSession) -> Result<(), StoreError> {
        let mut inner = self.inner.lock().expect("store poisoned");
        let entry = inner.entry(event.session_id.clone()).or_insert_with(|| (Vec::new(), snapshot.clone()));
        entry.0.push(event.clone());
        entry.1 = snapshot.clone();
        Ok(())
    }

    fn load(&self, session_id: &str) -> Result<Option<AssessmentSession>, StoreError> {
        Ok(self.inner.lock().expect("store poisoned").get(session_id).map(|(_, s)| s.clone()))
    }

    fn events(&self, session_id: &str) -> Result<Vec<LoggedEvent>, StoreError> {
        Ok(self.inner.lock().expect("store poisoned").get(session_id).map(|(e, _)| e.clone()).unwrap_or_default())
    }

    fn list(&self) -> Result<Vec<String>, StoreError> {
        Ok(self.inner.lock().expect("store poisoned").keys().cloned().collect())
    }
}

/// One directory per session holding `events.jsonl` and `snapshot.json`.
pub struct FileStore {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(FileStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, session_id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(session_id) {
            return Err(StoreError::NotFound(session_id.to_owned()));
        }
        Ok(self.root.join(session_id))
    }
}

impl SessionStore for FileStore {
    fn append(&self, event: &LoggedEvent, snapshot: &AssessmentSession) -> Result<(), StoreError> {
        let dir = self.dir(&event.session_id)?;
        fs::create_dir_all(&dir)?;
        let mut log = OpenOptions::new().create(true).append(true).open(dir.join("events.jsonl"))?;
        let line = serde_json::to_string(event).map_err(|e| StoreError::Io(e.to_string()))?;
        writeln!(log, "{line}")?;
        log.sync_data()?;
        let tmp = dir.join("snapshot.json.tmp");
        let body = serde_json::to_vec_pretty(snapshot).map_err(|e| StoreError::Io(e.to_string()))?;
        fs::write(&tmp, body)?;
        fs::rename(&tmp, dir.join("snapshot.json"))?;
        Ok(())
    }

    fn load(&self, session_id: &str) -> Result<Option<AssessmentSession>, StoreError> {
        let path = self.dir(session_id)?.join("snapshot.json");
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map(Some).map_err(|e| StoreError::Malformed(e.to_string()))
    }

    fn events(&self, session_id: &str) -> Result<Vec<LoggedEvent>, StoreError> {
        let path = self.dir(session_id)?.join("events.jsonl");
        if !path.exists() {
            return Ok(Vec::new());
        }
        BufReader::new(File::open(path)?)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| serde_json::from_str(&l?).map_err(|e| StoreError::Malformed(e.to_string())))
            .collect()
    }

    fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join("snapshot.json").exists() {
                if let Some(name) = entry.file_name().to_str() {
                    ids.push(name.to_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
