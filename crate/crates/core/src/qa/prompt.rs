use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::fewshot::FewShotExample;
use super::QaError;
use crate::document::{DocId, TrialDocument};
use crate::questionnaire::{Qid, SignalingQuestion};

/// Instruction opening every prompt.
pub const INSTRUCTION: &str = "You are an expert scientific researcher. You will be given a passage from a scientific paper reporting on a randomized controlled trial along with a question and elaboration of the question. Your task is to return the answer to the question out of the following set of answers: \"yes\", \"no\", \"probably yes\", \"probably no\", \"no information\". You should use the given passage to answer the question.";

/// What the model sees as evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContextMode {
    /// The annotator-selected evidence passage.
    Oracle,
    /// The `k` best retrieved paragraphs.
    TopK(usize),
    /// Every paragraph of the report.
    FullPaper,
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextMode::Oracle => f.write_str("oracle"),
            ContextMode::TopK(k) => write!(f, "topk:{k}"),
            ContextMode::FullPaper => f.write_str("full"),
        }
    }
}

impl FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "oracle" => Ok(ContextMode::Oracle),
            "full" | "full-paper" | "fullpaper" => Ok(ContextMode::FullPaper),
            _ => {
                let k = s
                    .strip_prefix("topk:")
                    .or_else(|| s.strip_prefix("k="))
                    .ok_or_else(|| format!("unknown context mode {s:?} (expected oracle, topk:K or full)"))?;
                match k.parse::<usize>() {
                    Ok(k) if k >= 1 => Ok(ContextMode::TopK(k)),
                    _ => Err(format!("top-k needs a positive integer, got {k:?}")),
                }
            }
        }
    }
}

impl Serialize for ContextMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ContextMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything a prompt is rendered from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec<'a> {
    pub instruction: &'a str,
    pub question: &'a str,
    /// `None` in few-shot mode.
    pub elaboration: Option<&'a str>,
    pub passages: &'a [String],
    pub fewshot: &'a [FewShotExample],
}

fn question_block(out: &mut String, question: &str, elaboration: Option<&str>, passages: &[String]) {
    out.push_str("Question: \"");
    out.push_str(question);
    out.push_str("\"\n\n");
    if let Some(e) = elaboration {
        out.push_str("Elaboration: \"");
        out.push_str(e);
        out.push_str("\"\n\n");
    }
    out.push_str("Passage(s):\n");
    out.push_str(&passages.join("\n"));
}

/// Renders the prompt text. Pure and deterministic.
///
/// Layout: the instruction, then for each few-shot example a block ending in
/// `Answer:<label>`, then the target question, its elaboration (zero-shot
/// only) and the passages in the order given, one per line.
pub fn render(spec: &PromptSpec<'_>) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str(spec.instruction);
    out.push_str("\n\n");
    for ex in spec.fewshot {
        question_block(&mut out, &ex.question, None, std::slice::from_ref(&ex.passage));
        out.push_str("\n\nAnswer:");
        out.push_str(ex.answer.label());
        out.push_str("\n\n");
    }
    question_block(&mut out, spec.question, spec.elaboration, spec.passages);
    out
}

/// Passages for full-paper context: every paragraph in document order,
/// prefixed by its section header when it has one.
pub fn full_paper_passages(doc: &TrialDocument) -> Vec<String> {
    doc.paragraphs
        .iter()
        .map(|p| {
            if p.section_header.is_empty() {
                p.text.clone()
            } else {
                format!("{}\n{}", p.section_header, p.text)
            }
        })
        .collect()
}

/// Zero-shot prompt with the question's elaboration.
pub fn build_prompt(q: &SignalingQuestion, mode: ContextMode, passages: &[String]) -> Result<String, QaError> {
    if passages.is_empty() {
        return Err(QaError::NoPassages(mode));
    }
    Ok(render(&PromptSpec {
        instruction: INSTRUCTION,
        question: &q.text,
        elaboration: Some(&q.elaboration),
        passages,
        fewshot: &[],
    }))
}

/// Few-shot prompt: answered example blocks followed by the target question,
/// without elaborations. Examples whose `(doc_id, qid)` appears in
/// `evaluation_set` are rejected.
pub fn build_fewshot_prompt(
    q: &SignalingQuestion,
    mode: ContextMode,
    passages: &[String],
    examples: &[FewShotExample],
    evaluation_set: &BTreeSet<(DocId, Qid)>,
) -> Result<String, QaError> {
    if passages.is_empty() {
        return Err(QaError::NoPassages(mode));
    }
    if let Some(ex) = examples.iter().find(|e| evaluation_set.contains(&(e.doc_id.clone(), e.qid))) {
        return Err(QaError::Contamination { doc_id: ex.doc_id.clone(), qid: ex.qid });
    }
    Ok(render(&PromptSpec {
        instruction: INSTRUCTION,
        question: &q.text,
        elaboration: None,
        passages,
        fewshot: examples,
    }))
}
