//! Loader for the released assessment corpus.
//!
//! Expected directory layout:
//!
//! ```text
//! <root>/assessments.jsonl     one DatasetRecord per line (or assessments/*.json)
//! <root>/documents/<doc_id>.json   parsed trial reports
//! <root>/vectors.json          optional reference embedding vectors
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::document::{ingest_document, DocId, DocumentError, TrialDocument};
use crate::evaluation::Class4;
use crate::qa::{ContextMode, ModelAnswer, OracleEvidence};
use crate::questionnaire::{Answer, Qid, Questionnaire};
use crate::retrieval::{tokenize, RetrievalResult, SidecarVectors};
use crate::rob_logic::{RiskLevel, RuleSet};
use crate::store::{
    AnswerSource, AssessmentSession, Provenance, QuestionRecord, RationaleSource, SessionStatus, Vote, VoteDirection,
};

pub const DOWNLOAD_HINT: &str = "download the released dataset from https://github.com/larchlab/ROBoto2 and lay it out as \
     <dir>/assessments.jsonl plus <dir>/documents/<doc_id>.json (see the dataset chapter of the guide)";

/// Smallest share of passage tokens a paragraph must contain for the passage
/// to be aligned to it.
pub const ALIGNMENT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset not found at {path}: {hint}")]
    Missing { path: PathBuf, hint: &'static str },
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Document {
        path: PathBuf,
        #[source]
        source: DocumentError,
    },
}

fn lenient_answer<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Answer>, D::Error> {
    let raw: Option<String> = Option::deserialize(d)?;
    match raw.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => s.parse().map(Some).map_err(serde::de::Error::custom),
    }
}

/// One signaling question of a released assessment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetQuestion {
    /// Final answer; absent or `NA` when switched off.
    #[serde(default, deserialize_with = "lenient_answer")]
    pub answer: Option<Answer>,
    #[serde(default)]
    pub rationale: Option<String>,
    /// Evidence passage copied by the annotator.
    #[serde(default)]
    pub evidence: Option<String>,
    #[serde(default, deserialize_with = "lenient_answer")]
    pub model_answer: Option<Answer>,
    #[serde(default)]
    pub model_rationale: Option<String>,
    #[serde(default)]
    pub answer_source: Option<AnswerSource>,
    #[serde(default)]
    pub rationale_source: Option<RationaleSource>,
    /// Paragraphs retrieved and shown to the annotator.
    #[serde(default)]
    pub retrieved: Vec<usize>,
    #[serde(default)]
    pub upvotes: Vec<usize>,
    #[serde(default)]
    pub downvotes: Vec<usize>,
    #[serde(default)]
    pub added_paragraphs: Vec<usize>,
}

/// One released assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub doc_id: DocId,
    pub provenance: Provenance,
    #[serde(default)]
    pub annotator_id: String,
    #[serde(default)]
    pub model_id: Option<String>,
    pub questions: BTreeMap<Qid, DatasetQuestion>,
    pub domain_judgments: [RiskLevel; 5],
    pub overall: RiskLevel,
}

impl DatasetRecord {
    /// Stored answers, switched-off questions as `NotApplicable`.
    pub fn answers(&self) -> BTreeMap<Qid, Answer> {
        self.questions.iter().map(|(q, a)| (*q, a.answer.unwrap_or(Answer::NotApplicable))).collect()
    }

    /// Four-class labels for all questions in qid order.
    pub fn class4_labels(&self, questionnaire: &Questionnaire) -> Vec<Class4> {
        let answers = self.answers();
        questionnaire
            .qids()
            .map(|q| Class4::from_answer(answers.get(&q).copied().unwrap_or(Answer::NotApplicable)))
            .collect()
    }

    /// Annotator evidence aligned to paragraphs of `doc`.
    pub fn oracle_evidence(&self, doc: &TrialDocument) -> BTreeMap<Qid, OracleEvidence> {
        self.questions
            .iter()
            .filter_map(|(q, a)| {
                let text = a.evidence.as_deref()?.trim();
                (!text.is_empty()).then(|| {
                    (*q, OracleEvidence { paragraph_index: align_evidence(doc, text), text: text.to_owned() })
                })
            })
            .collect()
    }

    /// Session view of the record. Manual records are expert-sourced
    /// throughout; for assisted records the sources are taken from the
    /// record or inferred by comparing final and model values.
    pub fn to_session(&self, paragraph_count: usize, ts: DateTime<Utc>) -> AssessmentSession {
        let mut records = BTreeMap::new();
        let model_id = self.model_id.clone().unwrap_or_default();
        let mode = ContextMode::TopK(3);
        for (qid, q) in &self.questions {
            let final_answer = q.answer.unwrap_or(Answer::NotApplicable);
            let model_answer = match (self.provenance, q.model_answer) {
                (Provenance::Assisted, Some(a)) => Some(ModelAnswer {
                    qid: *qid,
                    answer: a,
                    rationale: q.model_rationale.clone().unwrap_or_default(),
                    raw_response: String::new(),
                    model_id: model_id.clone(),
                    context_mode: mode,
                    evidence: q.retrieved.iter().map(|&p| RetrievalResult { paragraph_index: p, score: 0.0 }).collect(),
                }),
                _ => None,
            };
            let answer_source = if !final_answer.is_response() {
                AnswerSource::Gated
            } else if let Some(s) = q.answer_source {
                s
            } else if model_answer.as_ref().is_some_and(|m| m.answer == final_answer) {
                AnswerSource::Model
            } else {
                AnswerSource::Expert
            };
            let model_rationale = q.model_rationale.clone().unwrap_or_default();
            let final_rationale = q.rationale.clone().unwrap_or_else(|| model_rationale.clone());
            let rationale_source = q.rationale_source.unwrap_or(if model_answer.is_some() && final_rationale == model_rationale {
                RationaleSource::Model
            } else {
                RationaleSource::Expert
            });
            let mut votes: BTreeMap<usize, VoteDirection> = BTreeMap::new();
            for p in &q.upvotes {
                votes.insert(*p, VoteDirection::Up);
            }
            for p in &q.downvotes {
                votes.insert(*p, VoteDirection::Down);
            }
            let added: BTreeSet<usize> = q.added_paragraphs.iter().copied().collect();
            records.insert(
                *qid,
                QuestionRecord {
                    qid: *qid,
                    model_answer,
                    final_answer: Some(final_answer),
                    model_rationale,
                    final_rationale,
                    answer_source: Some(answer_source),
                    rationale_source,
                    votes: votes.into_iter().map(|(paragraph_index, direction)| Vote { paragraph_index, direction }).collect(),
                    added_paragraphs: added.into_iter().collect(),
                    created_at: ts,
                    updated_at: ts,
                },
            );
        }
        let annotator: String = self.annotator_id.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        let doc: String = self.doc_id.as_str().chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
        AssessmentSession {
            session_id: format!("ds-{doc}-{annotator}"),
            doc_id: self.doc_id.clone(),
            annotator_id: self.annotator_id.clone(),
            provenance: self.provenance,
            model_id: self.model_id.clone(),
            context_mode: (self.provenance == Provenance::Assisted).then_some(mode),
            paragraph_count,
            records,
            domain_judgments: self.domain_judgments.map(Some),
            overall: Some(self.overall),
            status: SessionStatus::Complete,
            created_at: ts,
            updated_at: ts,
        }
    }
}

fn normalized(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Paragraph an annotator-copied passage came from: the first paragraph
/// containing it verbatim (modulo case and whitespace), else the paragraph
/// containing the largest share of its tokens if that share reaches
/// [`ALIGNMENT_THRESHOLD`].
pub fn align_evidence(doc: &TrialDocument, passage: &str) -> Option<usize> {
    let needle = normalized(passage);
    if needle.is_empty() {
        return None;
    }
    if let Some(p) = doc.paragraphs.iter().find(|p| normalized(&p.text).contains(&needle)) {
        return Some(p.index);
    }
    let wanted: BTreeSet<String> = tokenize(passage).into_iter().collect();
    if wanted.is_empty() {
        return None;
    }
    let mut best: Option<(f64, usize)> = None;
    for p in &doc.paragraphs {
        let have: BTreeSet<String> = tokenize(&p.text).into_iter().collect();
        let share = wanted.intersection(&have).count() as f64 / wanted.len() as f64;
        if best.is_none_or(|(s, _)| share > s) {
            best = Some((share, p.index));
        }
    }
    best.filter(|(s, _)| *s >= ALIGNMENT_THRESHOLD).map(|(_, i)| i)
}

/// Counts of stored judgments per level (low, some concerns, high).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distribution {
    pub records: usize,
    pub domains: [[usize; 3]; 5],
    pub overall: [usize; 3],
}

fn level_index(r: RiskLevel) -> usize {
    match r {
        RiskLevel::Low => 0,
        RiskLevel::SomeConcerns => 1,
        RiskLevel::High => 2,
    }
}

/// One stored judgment that differs from the re-derived one. Domain 0 stands
/// for the overall judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub doc_id: DocId,
    pub annotator_id: String,
    pub domain: u8,
    pub stored: RiskLevel,
    pub derived: RiskLevel,
}

/// Stored versus re-derived judgments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub records: usize,
    pub domain_mismatches: [usize; 5],
    pub overall_mismatches: usize,
    pub mismatches: Vec<Mismatch>,
    /// Records whose answers could not be run through the flowcharts.
    pub errors: Vec<(DocId, String)>,
}

pub struct Dataset {
    pub root: PathBuf,
    pub records: Vec<DatasetRecord>,
    pub documents: BTreeMap<DocId, TrialDocument>,
    pub vectors: Option<SidecarVectors>,
}

fn read(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|e| DatasetError::Read { path: path.to_owned(), message: e.to_string() })
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| DatasetError::Read { path: dir.to_owned(), message: e.to_string() })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

impl Dataset {
    pub fn load(root: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let root = root.as_ref().to_owned();
        let jsonl = root.join("assessments.jsonl");
        let dir = root.join("assessments");
        let mut records = Vec::new();
        if jsonl.is_file() {
            for (n, line) in read(&jsonl)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                records.push(serde_json::from_str(line).map_err(|e| DatasetError::Read {
                    path: jsonl.clone(),
                    message: format!("line {}: {e}", n + 1),
                })?);
            }
        } else if dir.is_dir() {
            for f in json_files(&dir)? {
                let text = read(&f)?;
                records.push(serde_json::from_str(&text).map_err(|e| DatasetError::Read { path: f.clone(), message: e.to_string() })?);
            }
        } else {
            return Err(DatasetError::Missing { path: root, hint: DOWNLOAD_HINT });
        }

        let mut documents = BTreeMap::new();
        let doc_dir = root.join("documents");
        if doc_dir.is_dir() {
            for f in json_files(&doc_dir)? {
                let bytes = fs::read(&f).map_err(|e| DatasetError::Read { path: f.clone(), message: e.to_string() })?;
                let mut doc = ingest_document(&bytes).map_err(|source| DatasetError::Document { path: f.clone(), source })?;
                // Records refer to documents by file name.
                if let Some(stem) = f.file_stem().and_then(|s| s.to_str()) {
                    doc.doc_id = DocId::new(stem);
                }
                documents.insert(doc.doc_id.clone(), doc);
            }
        }

        let vec_path = root.join("vectors.json");
        let vectors = if vec_path.is_file() {
            Some(SidecarVectors::load(&vec_path).map_err(|e| DatasetError::Read { path: vec_path, message: e.to_string() })?)
        } else {
            None
        };
        Ok(Dataset { root, records, documents, vectors })
    }

    pub fn manual(&self) -> impl Iterator<Item = &DatasetRecord> {
        self.records.iter().filter(|r| r.provenance == Provenance::Manual)
    }

    pub fn assisted(&self) -> impl Iterator<Item = &DatasetRecord> {
        self.records.iter().filter(|r| r.provenance == Provenance::Assisted)
    }

    /// Documents assessed by two different annotators, as record pairs
    /// ordered by annotator id.
    pub fn dual_annotated(&self) -> Vec<(&DatasetRecord, &DatasetRecord)> {
        let mut by_doc: BTreeMap<&DocId, Vec<&DatasetRecord>> = BTreeMap::new();
        for r in &self.records {
            by_doc.entry(&r.doc_id).or_default().push(r);
        }
        by_doc
            .into_values()
            .filter_map(|mut v| {
                v.sort_by(|a, b| a.annotator_id.cmp(&b.annotator_id));
                v.dedup_by(|a, b| a.annotator_id == b.annotator_id);
                (v.len() >= 2).then(|| (v[0], v[1]))
            })
            .collect()
    }

    pub fn distribution(&self) -> Distribution {
        let mut d = Distribution { records: self.records.len(), ..Default::default() };
        for r in &self.records {
            for (i, level) in r.domain_judgments.iter().enumerate() {
                d.domains[i][level_index(*level)] += 1;
            }
            d.overall[level_index(r.overall)] += 1;
        }
        d
    }

    /// Re-derives judgments from stored answers and lists disagreements.
    pub fn consistency(&self, questionnaire: &Questionnaire, rules: &RuleSet) -> ConsistencyReport {
        let mut report = ConsistencyReport { records: self.records.len(), ..Default::default() };
        for r in &self.records {
            match rules.judge(questionnaire, &r.answers()) {
                Err(e) => report.errors.push((r.doc_id.clone(), e.to_string())),
                Ok(j) => {
                    let pairs = r.domain_judgments.iter().zip(j.domains).enumerate().map(|(i, (s, d))| (i as u8 + 1, *s, d));
                    for (domain, stored, derived) in pairs.chain([(0, r.overall, j.overall)]) {
                        if stored != derived {
                            if domain == 0 {
                                report.overall_mismatches += 1;
                            } else {
                                report.domain_mismatches[domain as usize - 1] += 1;
                            }
                            report.mismatches.push(Mismatch {
                                doc_id: r.doc_id.clone(),
                                annotator_id: r.annotator_id.clone(),
                                domain,
                                stored,
                                derived,
                            });
                        }
                    }
                }
            }
        }
        report
    }
}
