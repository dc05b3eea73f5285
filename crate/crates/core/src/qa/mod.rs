//! Question answering: prompt construction, LLM calls and answer parsing.

mod assess;
mod fewshot;
mod llm;
mod parse;
mod prompt;

pub use assess::{AssessConfig, AssessmentOutcome, Assessor, ModelAnswer, OracleEvidence, QuestionOutcome};
pub use fewshot::{FewShotExample, FewShotSet};
pub use llm::{
    prompt_digest, AuditedClient, ChatCompletionsClient, GenerationConfig, LlmClient, LlmError,
    ResponseCache, StubLlm,
};
pub use parse::parse_answer;
pub use prompt::{
    build_fewshot_prompt, build_prompt, full_paper_passages, render, ContextMode, PromptSpec, INSTRUCTION,
};

use thiserror::Error;

use crate::document::DocId;
use crate::questionnaire::{Qid, QuestionnaireError};
use crate::retrieval::RetrievalError;

#[derive(Debug, Error)]
pub enum QaError {
    #[error("no passages supplied for {0} context")]
    NoPassages(ContextMode),
    #[error("few-shot example {qid} of {doc_id} belongs to the evaluation set")]
    Contamination { doc_id: DocId, qid: Qid },
    #[error("response contains no answer label: {raw:?}")]
    Unparseable { raw: String },
    #[error("prompt of {len} characters exceeds the context budget of {budget}")]
    ContextOverflow { len: usize, budget: usize },
    #[error("no oracle evidence for question {0}")]
    NoOracleEvidence(Qid),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Gating(#[from] QuestionnaireError),
}
