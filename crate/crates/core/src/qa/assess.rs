use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::fewshot::FewShotSet;
use super::llm::{GenerationConfig, LlmClient, ResponseCache};
use super::parse::parse_answer;
use super::prompt::{build_fewshot_prompt, build_prompt, full_paper_passages, ContextMode};
use super::QaError;
use crate::document::{DocId, TrialDocument};
use crate::questionnaire::{Answer, Qid, Questionnaire, QuestionnaireError, SignalingQuestion};
use crate::retrieval::{EmbedError, Embedder, ParagraphIndex, RetrievalError, RetrievalResult, RetrieverKind, SidecarVectors};

/// Settings for one assessment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessConfig {
    pub mode: ContextMode,
    #[serde(default)]
    pub retriever: RetrieverKind,
    #[serde(default)]
    pub generation: GenerationConfig,
    /// Present in few-shot mode.
    #[serde(default)]
    pub fewshot: Option<FewShotSet>,
}

impl AssessConfig {
    pub fn new(mode: ContextMode) -> Self {
        AssessConfig { mode, retriever: RetrieverKind::default(), generation: GenerationConfig::default(), fewshot: None }
    }
}

/// Annotator-selected evidence for one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleEvidence {
    /// Paragraph the passage was aligned to, when alignment succeeded.
    pub paragraph_index: Option<usize>,
    pub text: String,
}

/// One parsed model prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAnswer {
    pub qid: Qid,
    pub answer: Answer,
    pub rationale: String,
    pub raw_response: String,
    pub model_id: String,
    pub context_mode: ContextMode,
    /// Paragraphs shown to the model: the retrieved top-k, the aligned oracle
    /// paragraph, or nothing in full-paper mode.
    pub evidence: Vec<RetrievalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QuestionOutcome {
    Answered(ModelAnswer),
    /// Gated off by earlier answers; recorded as `NotApplicable`.
    Skipped,
    Failed { error: String },
    /// Gating could not be decided because an antecedent has no answer.
    Blocked { by: Qid },
}

/// Per-question results of assessing one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentOutcome {
    pub doc_id: DocId,
    pub model_id: String,
    pub context_mode: ContextMode,
    pub questions: BTreeMap<Qid, QuestionOutcome>,
}

impl AssessmentOutcome {
    /// Answers so far, with skipped questions as `NotApplicable`.
    pub fn answers(&self) -> BTreeMap<Qid, Answer> {
        self.questions
            .iter()
            .filter_map(|(qid, o)| match o {
                QuestionOutcome::Answered(a) => Some((*qid, a.answer)),
                QuestionOutcome::Skipped => Some((*qid, Answer::NotApplicable)),
                _ => None,
            })
            .collect()
    }

    pub fn model_answers(&self) -> impl Iterator<Item = &ModelAnswer> {
        self.questions.values().filter_map(|o| match o {
            QuestionOutcome::Answered(a) => Some(a),
            _ => None,
        })
    }

    /// Questions that failed or were blocked and need another pass.
    pub fn pending(&self) -> Vec<Qid> {
        self.questions
            .iter()
            .filter(|(_, o)| matches!(o, QuestionOutcome::Failed { .. } | QuestionOutcome::Blocked { .. }))
            .map(|(q, _)| *q)
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.pending().is_empty()
    }
}

/// Answers signaling questions for documents with one LLM.
pub struct Assessor<'a> {
    questionnaire: &'a Questionnaire,
    llm: &'a dyn LlmClient,
    config: AssessConfig,
    embedder: Option<&'a dyn Embedder>,
    sidecar: Option<&'a SidecarVectors>,
    cache: Option<&'a ResponseCache>,
    evaluation_set: BTreeSet<(DocId, Qid)>,
}

impl<'a> Assessor<'a> {
    pub fn new(questionnaire: &'a Questionnaire, llm: &'a dyn LlmClient, config: AssessConfig) -> Self {
        Assessor {
            questionnaire,
            llm,
            config,
            embedder: None,
            sidecar: None,
            cache: None,
            evaluation_set: BTreeSet::new(),
        }
    }

    /// Embedder for question queries under embedding retrieval.
    pub fn with_embedder(mut self, embedder: &'a dyn Embedder) -> Self {
        self.embedder = Some(embedder);
        self
    }

    /// Precomputed query vectors, preferred over the embedder when present.
    pub fn with_sidecar(mut self, sidecar: &'a SidecarVectors) -> Self {
        self.sidecar = Some(sidecar);
        self
    }

    pub fn with_cache(mut self, cache: &'a ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    /// `(doc_id, qid)` pairs few-shot examples must not come from.
    pub fn with_evaluation_set(mut self, set: BTreeSet<(DocId, Qid)>) -> Self {
        self.evaluation_set = set;
        self
    }

    pub fn config(&self) -> &AssessConfig {
        &self.config
    }

    pub fn model_id(&self) -> &str {
        self.llm.model_id()
    }

    fn retrieve(&self, index: &ParagraphIndex, q: &SignalingQuestion, k: usize) -> Result<Vec<RetrievalResult>, QaError> {
        Ok(match self.config.retriever {
            RetrieverKind::Bm25 => index.query_bm25(&q.text, k)?,
            RetrieverKind::Embedding => {
                if let Some(v) = self.sidecar.filter(|s| s.model_id == index.model_id).and_then(|s| s.query(q.qid)) {
                    index.query_embedding(v, k)?
                } else if let Some(e) = self.embedder {
                    index.query_vector(&q.text, k, e)?
                } else {
                    return Err(RetrievalError::Query(EmbedError::Missing(format!("query vector for {}", q.qid))).into());
                }
            }
        })
    }

    fn passages(
        &self,
        doc: &TrialDocument,
        index: &ParagraphIndex,
        q: &SignalingQuestion,
        oracle: Option<&OracleEvidence>,
    ) -> Result<(Vec<String>, Vec<RetrievalResult>), QaError> {
        match self.config.mode {
            ContextMode::Oracle => {
                let ev = oracle.ok_or(QaError::NoOracleEvidence(q.qid))?;
                let evidence = ev
                    .paragraph_index
                    .map(|paragraph_index| RetrievalResult { paragraph_index, score: 1.0 })
                    .into_iter()
                    .collect();
                Ok((vec![ev.text.clone()], evidence))
            }
            ContextMode::TopK(k) => {
                let hits = self.retrieve(index, q, k)?;
                let passages = hits
                    .iter()
                    .filter_map(|h| doc.paragraph(h.paragraph_index).map(|p| p.text.clone()))
                    .collect();
                Ok((passages, hits))
            }
            ContextMode::FullPaper => Ok((full_paper_passages(doc), Vec::new())),
        }
    }

    fn call(&self, prompt: &str) -> Result<String, QaError> {
        Ok(match self.cache {
            Some(cache) => cache.complete(self.llm, prompt, &self.config.generation)?,
            None => self.llm.complete(prompt, &self.config.generation)?,
        })
    }

    /// Renders the prompt for one question without calling the model.
    pub fn render_prompt(
        &self,
        doc: &TrialDocument,
        index: &ParagraphIndex,
        qid: Qid,
        oracle: Option<&OracleEvidence>,
    ) -> Result<(String, Vec<RetrievalResult>), QaError> {
        let q = self.questionnaire.get(qid).ok_or(QuestionnaireError::UnknownQuestion(qid))?;
        let (passages, evidence) = self.passages(doc, index, q, oracle)?;
        let prompt = match &self.config.fewshot {
            Some(fs) => build_fewshot_prompt(q, self.config.mode, &passages, &fs.examples, &self.evaluation_set)?,
            None => build_prompt(q, self.config.mode, &passages)?,
        };
        if let Some(budget) = self.config.generation.context_budget_chars {
            let len = prompt.chars().count();
            if len > budget {
                return Err(QaError::ContextOverflow { len, budget });
            }
        }
        Ok((prompt, evidence))
    }

    /// Answers one question regardless of gating. An unparseable response is
    /// retried once with the identical prompt.
    pub fn answer_question(
        &self,
        doc: &TrialDocument,
        index: &ParagraphIndex,
        qid: Qid,
        oracle: Option<&OracleEvidence>,
    ) -> Result<ModelAnswer, QaError> {
        let (prompt, evidence) = self.render_prompt(doc, index, qid, oracle)?;
        let raw = self.call(&prompt)?;
        let (raw, (answer, rationale)) = match parse_answer(&raw) {
            Ok(parsed) => (raw, parsed),
            Err(_) => {
                let retry = self.llm.complete(&prompt, &self.config.generation)?;
                let parsed = parse_answer(&retry)?;
                (retry, parsed)
            }
        };
        Ok(ModelAnswer {
            qid,
            answer,
            rationale,
            raw_response: raw,
            model_id: self.llm.model_id().to_owned(),
            context_mode: self.config.mode,
            evidence,
        })
    }

    /// Walks all questions in qid order. Gated-off questions are skipped
    /// without a model call; failures are recorded per question.
    pub fn assess_document(
        &self,
        doc: &TrialDocument,
        index: &ParagraphIndex,
        oracle: &BTreeMap<Qid, OracleEvidence>,
    ) -> AssessmentOutcome {
        let fresh = AssessmentOutcome {
            doc_id: doc.doc_id.clone(),
            model_id: self.llm.model_id().to_owned(),
            context_mode: self.config.mode,
            questions: BTreeMap::new(),
        };
        self.resume(doc, index, oracle, fresh)
    }

    /// Continues `previous`, keeping settled questions and retrying failed
    /// or blocked ones.
    pub fn resume(
        &self,
        doc: &TrialDocument,
        index: &ParagraphIndex,
        oracle: &BTreeMap<Qid, OracleEvidence>,
        previous: AssessmentOutcome,
    ) -> AssessmentOutcome {
        let mut out = previous;
        let mut answers = out.answers();
        for q in self.questionnaire.questions() {
            if matches!(out.questions.get(&q.qid), Some(QuestionOutcome::Answered(_) | QuestionOutcome::Skipped)) {
                continue;
            }
            let outcome = match self.questionnaire.is_active(q.qid, &answers) {
                Err(QuestionnaireError::Sequencing { antecedent, .. }) => QuestionOutcome::Blocked { by: antecedent },
                Err(e) => QuestionOutcome::Failed { error: e.to_string() },
                Ok(false) => QuestionOutcome::Skipped,
                Ok(true) => match self.answer_question(doc, index, q.qid, oracle.get(&q.qid)) {
                    Ok(a) => QuestionOutcome::Answered(a),
                    Err(e) => QuestionOutcome::Failed { error: e.to_string() },
                },
            };
            match &outcome {
                QuestionOutcome::Answered(a) => {
                    answers.insert(q.qid, a.answer);
                }
                QuestionOutcome::Skipped => {
                    answers.insert(q.qid, Answer::NotApplicable);
                }
                _ => {}
            }
            out.questions.insert(q.qid, outcome);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::ingest_document;
    use crate::qa::StubLlm;
    use crate::retrieval::{Bm25Params, HashEmbedder};

    fn fixture() -> (TrialDocument, ParagraphIndex) {
        let doc = ingest_document(
            br#"{"title":"T","body_text":[
                {"text":"Participants were randomised by computer.","section":"Methods"},
                {"text":"Outcome assessors were blinded.","section":"Methods"}]}"#,
        )
        .unwrap();
        let idx = ParagraphIndex::build(&doc, &HashEmbedder, Bm25Params::default()).unwrap();
        (doc, idx)
    }

    #[test]
    fn unparseable_response_is_retried_once() {
        let (doc, idx) = fixture();
        let qn = Questionnaire::bundled();
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let llm = StubLlm::from_fn("stub", move |_| {
            let n = calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(if n == 0 { "hmm".into() } else { "yes. computer generated".into() })
        });
        let a = Assessor::new(&qn, &llm, AssessConfig::new(ContextMode::TopK(1)))
            .with_embedder(&HashEmbedder)
            .answer_question(&doc, &idx, "1.1".parse().unwrap(), None)
            .unwrap();
        assert_eq!(a.answer, Answer::Yes);
        assert_eq!(llm.calls(), 2);
    }

    #[test]
    fn persistent_garbage_fails_after_one_retry() {
        let (doc, idx) = fixture();
        let qn = Questionnaire::bundled();
        let llm = StubLlm::fixed("stub", "I cannot tell.");
        let err = Assessor::new(&qn, &llm, AssessConfig::new(ContextMode::FullPaper))
            .answer_question(&doc, &idx, "1.1".parse().unwrap(), None)
            .unwrap_err();
        assert!(matches!(err, QaError::Unparseable { .. }));
        assert_eq!(llm.calls(), 2);
    }

    #[test]
    fn overflow_rejected_before_calling() {
        let (doc, idx) = fixture();
        let qn = Questionnaire::bundled();
        let llm = StubLlm::fixed("stub", "yes");
        let mut cfg = AssessConfig::new(ContextMode::FullPaper);
        cfg.generation.context_budget_chars = Some(100);
        let err = Assessor::new(&qn, &llm, cfg).answer_question(&doc, &idx, "1.1".parse().unwrap(), None).unwrap_err();
        assert!(matches!(err, QaError::ContextOverflow { budget: 100, .. }));
        assert_eq!(llm.calls(), 0);
    }

    #[test]
    fn oracle_mode_without_evidence_fails() {
        let (doc, idx) = fixture();
        let qn = Questionnaire::bundled();
        let llm = StubLlm::fixed("stub", "yes");
        let err = Assessor::new(&qn, &llm, AssessConfig::new(ContextMode::Oracle))
            .answer_question(&doc, &idx, "1.1".parse().unwrap(), None)
            .unwrap_err();
        assert!(matches!(err, QaError::NoOracleEvidence(_)));
    }

    #[test]
    fn failure_blocks_dependents_and_resume_completes() {
        let (doc, idx) = fixture();
        let qn = Questionnaire::bundled();
        let down = StubLlm::from_fn("stub", |_| Err(crate::qa::LlmError::Transport("down".into())));
        let cfg = AssessConfig::new(ContextMode::TopK(2));
        let first = Assessor::new(&qn, &down, cfg.clone()).with_embedder(&HashEmbedder).assess_document(&doc, &idx, &BTreeMap::new());
        assert!(matches!(first.questions[&"2.1".parse().unwrap()], QuestionOutcome::Failed { .. }));
        assert!(matches!(first.questions[&"2.3".parse().unwrap()], QuestionOutcome::Blocked { .. }));
        let up = StubLlm::fixed("stub", "no");
        let second = Assessor::new(&qn, &up, cfg).with_embedder(&HashEmbedder).resume(&doc, &idx, &BTreeMap::new(), first);
        assert!(second.is_complete());
        assert_eq!(second.answers().len(), 22);
    }
}
