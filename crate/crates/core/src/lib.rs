//! LLM-assisted ROB2 risk-of-bias assessment of clinical-trial reports.
//!
//! The pipeline ingests a parsed trial report, retrieves evidence paragraphs
//! for each signaling question, prompts a language model, parses the answer,
//! applies cascade gating and derives domain and overall judgments from the
//! flowchart tables. Reviewer edits are journaled per session, and the
//! [`evaluation`] module scores predictions against gold labels.

pub mod clock;
pub mod config;
pub mod dataset;
pub mod document;
pub mod evaluation;
pub mod qa;
pub mod questionnaire;
pub mod retrieval;
pub mod rob_logic;
pub mod store;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/documents.md")]
    mod documents {}
    #[doc = include_str!("../../../book/src/questionnaire.md")]
    mod questionnaire {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/answering.md")]
    mod answering {}
    #[doc = include_str!("../../../book/src/judgments.md")]
    mod judgments {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    mod sessions {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/dataset.md")]
    mod dataset {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
}
