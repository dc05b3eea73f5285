use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::document::DocId;
use crate::qa::{ContextMode, ModelAnswer};
use crate::questionnaire::{is_active, Answer, Qid, Questionnaire, QuestionnaireError};
use crate::rob_logic::{RiskLevel, RuleSet};

/// Version tag written into every exported session.
pub const SCHEMA_VERSION: &str = "rob2-session/1";

/// How the assessment was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Filled in by hand without model suggestions.
    Manual,
    /// Reviewed model suggestions.
    Assisted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Model,
    Expert,
    /// Switched off by a cascade gate; the answer is `NotApplicable`.
    Gated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationaleSource {
    Model,
    Expert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub paragraph_index: usize,
    pub direction: VoteDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    InProgress,
    Complete,
}

/// State of one signaling question within a session.
///
/// `final_answer` is `None` while the question is unanswered, including after
/// an override upstream switched it back on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub qid: Qid,
    pub model_answer: Option<ModelAnswer>,
    pub final_answer: Option<Answer>,
    pub model_rationale: String,
    pub final_rationale: String,
    pub answer_source: Option<AnswerSource>,
    pub rationale_source: RationaleSource,
    /// At most one vote per paragraph, ordered by paragraph index.
    pub votes: Vec<Vote>,
    pub added_paragraphs: Vec<usize>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl QuestionRecord {
    fn empty(qid: Qid, ts: DateTime<Utc>) -> Self {
        QuestionRecord {
            qid,
            model_answer: None,
            final_answer: None,
            model_rationale: String::new(),
            final_rationale: String::new(),
            answer_source: None,
            rationale_source: RationaleSource::Model,
            votes: Vec::new(),
            added_paragraphs: Vec::new(),
            created_at: ts,
            updated_at: ts,
        }
    }

    /// Paragraphs shown to the reviewer as retrieved evidence.
    pub fn evidence_paragraphs(&self) -> impl Iterator<Item = usize> + '_ {
        self.model_answer.iter().flat_map(|m| m.evidence.iter().map(|e| e.paragraph_index))
    }

    pub fn vote(&self, paragraph: usize) -> Option<VoteDirection> {
        self.votes.iter().find(|v| v.paragraph_index == paragraph).map(|v| v.direction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentSession {
    pub session_id: String,
    pub doc_id: DocId,
    pub annotator_id: String,
    pub provenance: Provenance,
    pub model_id: Option<String>,
    pub context_mode: Option<ContextMode>,
    /// Number of paragraphs in the document, bounding added paragraphs.
    pub paragraph_count: usize,
    pub records: BTreeMap<Qid, QuestionRecord>,
    /// `None` for domains with unanswered questions.
    pub domain_judgments: [Option<RiskLevel>; 5],
    pub overall: Option<RiskLevel>,
    pub status: SessionStatus,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

/// Session mutations as journaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "payload", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        doc_id: DocId,
        annotator_id: String,
        provenance: Provenance,
        model_id: Option<String>,
        context_mode: Option<ContextMode>,
        paragraph_count: usize,
    },
    ModelAnswered {
        answer: ModelAnswer,
    },
    Overridden {
        qid: Qid,
        answer: Answer,
        rationale: Option<String>,
    },
    RationaleEdited {
        qid: Qid,
        rationale: String,
    },
    Voted {
        qid: Qid,
        paragraph_index: usize,
        direction: VoteDirection,
    },
    ParagraphAdded {
        qid: Qid,
        paragraph_index: usize,
    },
    Completed,
    /// Whole-session replacement, used when importing.
    Imported {
        session: Box<AssessmentSession>,
    },
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub ts: DateTime<Utc>,
    pub session_id: String,
    #[serde(flatten)]
    pub event: SessionEvent,
}

impl AssessmentSession {
    /// Builds the initial state from a `Created` or `Imported` event.
    pub fn from_event(ev: &LoggedEvent) -> Result<Self, StoreError> {
        match &ev.event {
            SessionEvent::Created { doc_id, annotator_id, provenance, model_id, context_mode, paragraph_count } => {
                Ok(AssessmentSession {
                    session_id: ev.session_id.clone(),
                    doc_id: doc_id.clone(),
                    annotator_id: annotator_id.clone(),
                    provenance: *provenance,
                    model_id: model_id.clone(),
                    context_mode: *context_mode,
                    paragraph_count: *paragraph_count,
                    records: BTreeMap::new(),
                    domain_judgments: [None; 5],
                    overall: None,
                    status: SessionStatus::InProgress,
                    created_at: ev.ts,
                    updated_at: ev.ts,
                })
            }
            SessionEvent::Imported { session } => Ok((**session).clone()),
            _ => Err(StoreError::Malformed("event log must start with a created or imported event".into())),
        }
    }

    /// Current final answers, `NotApplicable` included.
    pub fn final_answers(&self) -> BTreeMap<Qid, Answer> {
        self.records.iter().filter_map(|(q, r)| r.final_answer.map(|a| (*q, a))).collect()
    }

    /// Whether `qid` is switched on by the current final answers.
    pub fn activation(&self, questionnaire: &Questionnaire, qid: Qid) -> Result<bool, StoreError> {
        match questionnaire.is_active(qid, &self.final_answers()) {
            Ok(active) => Ok(active),
            Err(QuestionnaireError::Sequencing { qid, antecedent }) => Err(StoreError::Undetermined { qid, antecedent }),
            Err(e) => Err(e.into()),
        }
    }

    fn require_active(&self, questionnaire: &Questionnaire, qid: Qid) -> Result<(), StoreError> {
        if self.activation(questionnaire, qid)? {
            Ok(())
        } else {
            Err(StoreError::GatedOff(qid))
        }
    }

    fn record_mut(&mut self, qid: Qid, ts: DateTime<Utc>) -> &mut QuestionRecord {
        let r = self.records.entry(qid).or_insert_with(|| QuestionRecord::empty(qid, ts));
        r.updated_at = ts;
        r
    }

    fn answered_record(&mut self, qid: Qid, ts: DateTime<Utc>) -> Result<&mut QuestionRecord, StoreError> {
        match self.records.get(&qid) {
            Some(r) if r.final_answer.is_some() && r.answer_source != Some(AnswerSource::Gated) => {
                Ok(self.record_mut(qid, ts))
            }
            _ => Err(StoreError::Unanswered(qid)),
        }
    }

    /// Validates `ev` against the current state and applies it.
    pub fn apply(&mut self, ev: &LoggedEvent, questionnaire: &Questionnaire, rules: &RuleSet) -> Result<(), StoreError> {
        if ev.session_id != self.session_id {
            return Err(StoreError::Malformed(format!("event for {} applied to {}", ev.session_id, self.session_id)));
        }
        let ts = ev.ts;
        if let SessionEvent::Imported { session } = &ev.event {
            *self = (**session).clone();
            return Ok(());
        }
        if self.status == SessionStatus::Complete {
            return Err(StoreError::Complete);
        }
        match &ev.event {
            SessionEvent::Created { .. } | SessionEvent::Imported { .. } => {
                return Err(StoreError::Exists(self.session_id.clone()))
            }
            SessionEvent::ModelAnswered { answer } => {
                if !answer.answer.is_response() {
                    return Err(StoreError::InvalidAnswer(answer.answer));
                }
                self.require_active(questionnaire, answer.qid)?;
                if self.records.get(&answer.qid).is_some_and(|r| r.model_answer.is_some()) {
                    return Err(StoreError::AlreadyAnswered(answer.qid));
                }
                let r = self.record_mut(answer.qid, ts);
                r.model_rationale = answer.rationale.clone();
                if r.final_answer.is_none() {
                    r.final_answer = Some(answer.answer);
                    r.answer_source = Some(AnswerSource::Model);
                }
                if r.rationale_source == RationaleSource::Model {
                    r.final_rationale = answer.rationale.clone();
                }
                r.model_answer = Some(answer.clone());
            }
            SessionEvent::Overridden { qid, answer, rationale } => {
                if !answer.is_response() {
                    return Err(StoreError::InvalidAnswer(*answer));
                }
                self.require_active(questionnaire, *qid)?;
                let r = self.record_mut(*qid, ts);
                r.final_answer = Some(*answer);
                r.answer_source = Some(AnswerSource::Expert);
                if let Some(text) = rationale {
                    r.final_rationale = text.clone();
                    r.rationale_source = RationaleSource::Expert;
                }
            }
            SessionEvent::RationaleEdited { qid, rationale } => {
                let r = self.answered_record(*qid, ts)?;
                r.final_rationale = rationale.clone();
                r.rationale_source = RationaleSource::Expert;
            }
            SessionEvent::Voted { qid, paragraph_index, direction } => {
                let shown = self.records.get(qid).is_some_and(|r| r.evidence_paragraphs().any(|p| p == *paragraph_index));
                if !shown {
                    return Err(StoreError::NotEvidence { qid: *qid, paragraph: *paragraph_index });
                }
                let r = self.record_mut(*qid, ts);
                r.votes.retain(|v| v.paragraph_index != *paragraph_index);
                r.votes.push(Vote { paragraph_index: *paragraph_index, direction: *direction });
                r.votes.sort_by_key(|v| v.paragraph_index);
            }
            SessionEvent::ParagraphAdded { qid, paragraph_index } => {
                if *paragraph_index >= self.paragraph_count {
                    return Err(StoreError::NoSuchParagraph { paragraph: *paragraph_index, count: self.paragraph_count });
                }
                if self.records.get(qid).is_some_and(|r| r.evidence_paragraphs().any(|p| p == *paragraph_index)) {
                    return Err(StoreError::AlreadyEvidence { qid: *qid, paragraph: *paragraph_index });
                }
                let r = self.answered_record(*qid, ts)?;
                if !r.added_paragraphs.contains(paragraph_index) {
                    r.added_paragraphs.push(*paragraph_index);
                    r.added_paragraphs.sort_unstable();
                }
            }
            SessionEvent::Completed => {
                let missing = questionnaire.qids().filter(|q| self.records.get(q).is_none_or(|r| r.final_answer.is_none())).count();
                if missing > 0 {
                    return Err(StoreError::Incomplete(missing));
                }
                let j = rules.judge(questionnaire, &self.final_answers())?;
                self.domain_judgments = j.domains.map(Some);
                self.overall = Some(j.overall);
                self.status = SessionStatus::Complete;
                self.updated_at = ts;
                return Ok(());
            }
        }
        self.reconcile(questionnaire, ts);
        self.rejudge(questionnaire, rules);
        self.updated_at = ts;
        Ok(())
    }

    /// Re-evaluates every gate in qid order. Newly switched-off questions get
    /// `NotApplicable`; questions switched back on are cleared to unanswered.
    /// Model originals are kept either way.
    fn reconcile(&mut self, questionnaire: &Questionnaire, ts: DateTime<Utc>) {
        let mut known: BTreeMap<Qid, Answer> = BTreeMap::new();
        for q in questionnaire.questions() {
            let gated = self.records.get(&q.qid).is_some_and(|r| r.answer_source == Some(AnswerSource::Gated));
            match is_active(q, &known) {
                Ok(false) => {
                    if !gated {
                        let r = self.record_mut(q.qid, ts);
                        r.final_answer = Some(Answer::NotApplicable);
                        r.answer_source = Some(AnswerSource::Gated);
                    }
                    known.insert(q.qid, Answer::NotApplicable);
                    continue;
                }
                Err(_) if self.records.get(&q.qid).is_some_and(|r| r.final_answer.is_some()) => {
                    // An antecedent changed and the gate is open again; the
                    // model answer stays on the record.
                    let r = self.record_mut(q.qid, ts);
                    r.final_answer = None;
                    r.answer_source = None;
                }
                _ if gated => {
                    let r = self.record_mut(q.qid, ts);
                    r.final_answer = None;
                    r.answer_source = None;
                }
                _ => {}
            }
            if let Some(a) = self.records.get(&q.qid).and_then(|r| r.final_answer) {
                known.insert(q.qid, a);
            }
        }
    }

    fn rejudge(&mut self, questionnaire: &Questionnaire, rules: &RuleSet) {
        self.domain_judgments = rules.partial(questionnaire, &self.final_answers());
        self.overall = match self.domain_judgments {
            [Some(a), Some(b), Some(c), Some(d), Some(e)] => Some(rules.overall.judge(&[a, b, c, d, e])),
            _ => None,
        };
    }
}

#[derive(Serialize)]
struct ExportRef<'a> {
    schema_version: &'a str,
    #[serde(flatten)]
    session: &'a AssessmentSession,
}

#[derive(Deserialize)]
struct ExportOwned {
    schema_version: String,
    #[serde(flatten)]
    session: serde_json::Value,
}

/// Canonical JSON with a schema version.
pub fn export_session(session: &AssessmentSession) -> String {
    serde_json::to_string_pretty(&ExportRef { schema_version: SCHEMA_VERSION, session }).expect("session serializes")
}

pub fn import_session(json: &str) -> Result<AssessmentSession, StoreError> {
    let wrapper: ExportOwned = serde_json::from_str(json).map_err(|e| StoreError::Malformed(e.to_string()))?;
    if wrapper.schema_version != SCHEMA_VERSION {
        return Err(StoreError::SchemaVersion(wrapper.schema_version));
    }
    serde_json::from_value(wrapper.session).map_err(|e| StoreError::Malformed(e.to_string()))
}
