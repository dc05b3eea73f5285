use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backend::SessionStore;
use super::session::{
    AssessmentSession, LoggedEvent, Provenance, QuestionRecord, SessionEvent, SessionStatus, VoteDirection,
};
use super::StoreError;
use crate::clock::{Clock, SystemClock};
use crate::document::DocId;
use crate::qa::{ContextMode, ModelAnswer};
use crate::questionnaire::{Answer, Qid, Questionnaire};
use crate::rob_logic::{RiskLevel, RuleSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewSession {
    pub doc_id: DocId,
    pub annotator_id: String,
    pub provenance: Provenance,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub context_mode: Option<ContextMode>,
    pub paragraph_count: usize,
}

/// A question as seen by a reviewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionState {
    pub qid: Qid,
    /// `None` while an antecedent is unanswered.
    pub active: Option<bool>,
    pub record: Option<QuestionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub session_id: String,
    pub status: SessionStatus,
    pub domain_judgments: [Option<RiskLevel>; 5],
    pub overall: Option<RiskLevel>,
    pub answered: usize,
    pub unanswered: Vec<Qid>,
}

/// Applies validated mutations to stored sessions. Each mutation is
/// journaled before it is returned; mutations of one session are serialized.
pub struct Workbench {
    questionnaire: Arc<Questionnaire>,
    rules: Arc<RuleSet>,
    store: Box<dyn SessionStore>,
    clock: Arc<dyn Clock>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Workbench {
    pub fn new(questionnaire: Arc<Questionnaire>, rules: Arc<RuleSet>, store: Box<dyn SessionStore>) -> Self {
        Self::with_clock(questionnaire, rules, store, Arc::new(SystemClock))
    }

    pub fn with_clock(
        questionnaire: Arc<Questionnaire>,
        rules: Arc<RuleSet>,
        store: Box<dyn SessionStore>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Workbench { questionnaire, rules, store, clock, locks: Mutex::new(HashMap::new()) }
    }

    pub fn questionnaire(&self) -> &Questionnaire {
        &self.questionnaire
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn store(&self) -> &dyn SessionStore {
        self.store.as_ref()
    }

    fn lock(&self, session_id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().expect("lock table poisoned").entry(session_id.to_owned()).or_default().clone()
    }

    pub fn create_session(&self, new: NewSession) -> Result<AssessmentSession, StoreError> {
        let ts = self.clock.now();
        let existing = self.store.list()?.len();
        let mut h = Sha256::new();
        for part in [
            new.doc_id.as_str(),
            &new.annotator_id,
            new.model_id.as_deref().unwrap_or(""),
            &new.context_mode.map(|m| m.to_string()).unwrap_or_default(),
            &ts.to_rfc3339(),
            &existing.to_string(),
        ] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        let session_id = format!("s-{}", &hex::encode(h.finalize())[..16]);
        let event = LoggedEvent {
            ts,
            session_id: session_id.clone(),
            event: SessionEvent::Created {
                doc_id: new.doc_id,
                annotator_id: new.annotator_id,
                provenance: new.provenance,
                model_id: new.model_id,
                context_mode: new.context_mode,
                paragraph_count: new.paragraph_count,
            },
        };
        let guard = self.lock(&session_id);
        let _g = guard.lock().expect("session lock poisoned");
        if self.store.load(&session_id)?.is_some() {
            return Err(StoreError::Exists(session_id));
        }
        let session = AssessmentSession::from_event(&event)?;
        self.store.append(&event, &session)?;
        Ok(session)
    }

    /// Stores a complete session as-is, e.g. one imported from a dataset.
    pub fn import(&self, session: AssessmentSession) -> Result<AssessmentSession, StoreError> {
        let guard = self.lock(&session.session_id);
        let _g = guard.lock().expect("session lock poisoned");
        if self.store.load(&session.session_id)?.is_some() {
            return Err(StoreError::Exists(session.session_id));
        }
        let event = LoggedEvent {
            ts: self.clock.now(),
            session_id: session.session_id.clone(),
            event: SessionEvent::Imported { session: Box::new(session.clone()) },
        };
        self.store.append(&event, &session)?;
        Ok(session)
    }

    pub fn get(&self, session_id: &str) -> Result<AssessmentSession, StoreError> {
        self.store.load(session_id)?.ok_or_else(|| StoreError::NotFound(session_id.to_owned()))
    }

    fn mutate(&self, session_id: &str, event: SessionEvent) -> Result<AssessmentSession, StoreError> {
        let guard = self.lock(session_id);
        let _g = guard.lock().expect("session lock poisoned");
        let mut session = self.get(session_id)?;
        let logged = LoggedEvent { ts: self.clock.now(), session_id: session_id.to_owned(), event };
        session.apply(&logged, &self.questionnaire, &self.rules)?;
        self.store.append(&logged, &session)?;
        Ok(session)
    }

    pub fn record_model_answer(&self, session_id: &str, answer: ModelAnswer) -> Result<AssessmentSession, StoreError> {
        self.mutate(session_id, SessionEvent::ModelAnswered { answer })
    }

    /// Reviewer answer, optionally with a new rationale. Downstream gates are
    /// re-evaluated.
    pub fn record_override(
        &self,
        session_id: &str,
        qid: Qid,
        answer: Answer,
        rationale: Option<String>,
    ) -> Result<AssessmentSession, StoreError> {
        self.mutate(session_id, SessionEvent::Overridden { qid, answer, rationale })
    }

    pub fn edit_rationale(&self, session_id: &str, qid: Qid, rationale: String) -> Result<AssessmentSession, StoreError> {
        self.mutate(session_id, SessionEvent::RationaleEdited { qid, rationale })
    }

    pub fn record_vote(
        &self,
        session_id: &str,
        qid: Qid,
        paragraph_index: usize,
        direction: VoteDirection,
    ) -> Result<AssessmentSession, StoreError> {
        self.mutate(session_id, SessionEvent::Voted { qid, paragraph_index, direction })
    }

    pub fn add_paragraph(&self, session_id: &str, qid: Qid, paragraph_index: usize) -> Result<AssessmentSession, StoreError> {
        self.mutate(session_id, SessionEvent::ParagraphAdded { qid, paragraph_index })
    }

    pub fn complete(&self, session_id: &str) -> Result<AssessmentSession, StoreError> {
        self.mutate(session_id, SessionEvent::Completed)
    }

    pub fn question(&self, session_id: &str, qid: Qid) -> Result<QuestionState, StoreError> {
        let session = self.get(session_id)?;
        let active = match session.activation(&self.questionnaire, qid) {
            Ok(a) => Some(a),
            Err(StoreError::Undetermined { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(QuestionState { qid, active, record: session.records.get(&qid).cloned() })
    }

    pub fn summary(&self, session_id: &str) -> Result<Summary, StoreError> {
        let session = self.get(session_id)?;
        let unanswered: Vec<Qid> = self
            .questionnaire
            .qids()
            .filter(|q| session.records.get(q).is_none_or(|r| r.final_answer.is_none()))
            .collect();
        Ok(Summary {
            session_id: session.session_id,
            status: session.status,
            domain_judgments: session.domain_judgments,
            overall: session.overall,
            answered: self.questionnaire.questions().len() - unanswered.len(),
            unanswered,
        })
    }

    /// Rebuilds a session from its event log.
    pub fn replay(&self, session_id: &str) -> Result<AssessmentSession, StoreError> {
        let events = self.store.events(session_id)?;
        let first = events.first().ok_or_else(|| StoreError::NotFound(session_id.to_owned()))?;
        let mut session = AssessmentSession::from_event(first)?;
        for ev in &events[1..] {
            session.apply(ev, &self.questionnaire, &self.rules)?;
        }
        Ok(session)
    }
}
