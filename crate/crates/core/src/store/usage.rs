use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::session::{AnswerSource, AssessmentSession, RationaleSource, SessionStatus, VoteDirection};

/// Reviewer-feedback counts over answered (not gated) questions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageCounts {
    pub model_answers: usize,
    pub expert_answers: usize,
    pub model_rationales: usize,
    pub expert_rationales: usize,
    /// Questions with at least one upvote.
    pub upvote_questions: usize,
    /// Questions with at least one downvote.
    pub downvote_questions: usize,
    /// Questions with at least one added paragraph.
    pub added_paragraph_questions: usize,
    pub upvotes: usize,
    pub downvotes: usize,
    pub added_paragraphs: usize,
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

impl UsageCounts {
    pub fn model_answer_pct(&self) -> f64 {
        percent(self.model_answers, self.model_answers + self.expert_answers)
    }

    pub fn expert_answer_pct(&self) -> f64 {
        percent(self.expert_answers, self.model_answers + self.expert_answers)
    }

    pub fn model_rationale_pct(&self) -> f64 {
        percent(self.model_rationales, self.model_rationales + self.expert_rationales)
    }

    pub fn expert_rationale_pct(&self) -> f64 {
        percent(self.expert_rationales, self.model_rationales + self.expert_rationales)
    }

    /// Share of voted questions that received an upvote, in percent.
    pub fn positive_feedback_pct(&self) -> f64 {
        percent(self.upvote_questions, self.upvote_questions + self.downvote_questions)
    }
}

impl AddAssign for UsageCounts {
    fn add_assign(&mut self, o: Self) {
        self.model_answers += o.model_answers;
        self.expert_answers += o.expert_answers;
        self.model_rationales += o.model_rationales;
        self.expert_rationales += o.expert_rationales;
        self.upvote_questions += o.upvote_questions;
        self.downvote_questions += o.downvote_questions;
        self.added_paragraph_questions += o.added_paragraph_questions;
        self.upvotes += o.upvotes;
        self.downvotes += o.downvotes;
        self.added_paragraphs += o.added_paragraphs;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageStats {
    pub sessions: usize,
    /// Sessions passed in but not complete, and therefore not counted.
    pub skipped_incomplete: usize,
    pub domains: [UsageCounts; 5],
    pub total: UsageCounts,
}

/// Per-domain and total feedback counts over complete sessions.
pub fn usage_stats<'a>(sessions: impl IntoIterator<Item = &'a AssessmentSession>) -> UsageStats {
    let mut out = UsageStats::default();
    for s in sessions {
        if s.status != SessionStatus::Complete {
            out.skipped_incomplete += 1;
            continue;
        }
        out.sessions += 1;
        for (qid, r) in &s.records {
            let c = &mut out.domains[qid.domain() as usize - 1];
            match r.answer_source {
                Some(AnswerSource::Model) => c.model_answers += 1,
                Some(AnswerSource::Expert) => c.expert_answers += 1,
                Some(AnswerSource::Gated) | None => continue,
            }
            match r.rationale_source {
                RationaleSource::Model => c.model_rationales += 1,
                RationaleSource::Expert => c.expert_rationales += 1,
            }
            let ups = r.votes.iter().filter(|v| v.direction == VoteDirection::Up).count();
            let downs = r.votes.len() - ups;
            c.upvotes += ups;
            c.downvotes += downs;
            c.upvote_questions += usize::from(ups > 0);
            c.downvote_questions += usize::from(downs > 0);
            c.added_paragraphs += r.added_paragraphs.len();
            c.added_paragraph_questions += usize::from(!r.added_paragraphs.is_empty());
        }
    }
    for d in out.domains {
        out.total += d;
    }
    out
}
