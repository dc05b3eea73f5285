//! Assessment sessions: model answers, reviewer overrides, rationale edits,
//! evidence votes and added paragraphs, stored as an append-only event log
//! with a materialized snapshot.

mod backend;
mod session;
mod usage;
mod workbench;

pub use backend::{FileStore, MemoryStore, SessionStore};
pub use session::{
    export_session, import_session, AnswerSource, AssessmentSession, LoggedEvent, Provenance, QuestionRecord,
    RationaleSource, SessionEvent, SessionStatus, Vote, VoteDirection, SCHEMA_VERSION,
};
pub use usage::{usage_stats, UsageCounts, UsageStats};
pub use workbench::{NewSession, QuestionState, Summary, Workbench};

use thiserror::Error;

use crate::questionnaire::{Qid, QuestionnaireError};
use crate::rob_logic::RuleError;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("session {0} already exists")]
    Exists(String),
    #[error("session is complete and can no longer change")]
    Complete,
    #[error("question {0} is switched off by earlier answers")]
    GatedOff(Qid),
    #[error("question {qid} cannot be answered before {antecedent}")]
    Undetermined { qid: Qid, antecedent: Qid },
    #[error("question {0} already has a model answer")]
    AlreadyAnswered(Qid),
    #[error("question {0} has no answer yet")]
    Unanswered(Qid),
    #[error("paragraph {paragraph} was not shown as evidence for {qid}")]
    NotEvidence { qid: Qid, paragraph: usize },
    #[error("paragraph {paragraph} is already retrieved evidence for {qid}")]
    AlreadyEvidence { qid: Qid, paragraph: usize },
    #[error("paragraph {paragraph} is out of range (document has {count})")]
    NoSuchParagraph { paragraph: usize, count: usize },
    #[error("{0} cannot be chosen by a reviewer or a model")]
    InvalidAnswer(crate::questionnaire::Answer),
    #[error("cannot complete: {0} questions unanswered")]
    Incomplete(usize),
    #[error(transparent)]
    Questionnaire(#[from] QuestionnaireError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error("unsupported session schema version {0:?}")]
    SchemaVersion(String),
    #[error("malformed session: {0}")]
    Malformed(String),
    #[error("storage: {0}")]
    Io(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}
