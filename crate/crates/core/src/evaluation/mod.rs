//! Scoring of predicted signaling answers against gold labels.
//!
//! Answers are collapsed to three classes before scoring: Y/PY, N/PN and NI.
//! `NotApplicable` is not scored, except as a fourth class for inter-rater
//! agreement.

mod benchmark;
mod metrics;

pub use benchmark::{
    fewshot_pool, gold_questions, question_counts, rank_evidence, run_benchmark, BenchmarkItem, BenchmarkRun,
    BenchmarkSettings, ItemFailure, RunCacheLine, RunMetadata, Table2Row,
};
pub use metrics::{
    average_severity, cohens_kappa, cohens_kappa_4class, f1_scores, severity, severity_breakdown, ClassScore,
    ErrorSeverity, F1Report, ScoredPair, SeverityLayout, SeverityRow, SeverityTable,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::questionnaire::Answer;

#[derive(Debug, Error, PartialEq)]
pub enum EvaluationError {
    #[error("run has no scored items")]
    EmptyRun,
    #[error("rater label vectors have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("no items to compare")]
    NoItems,
}

/// Three-way aggregation of answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class3 {
    #[serde(rename = "Y/PY")]
    Ypy,
    #[serde(rename = "N/PN")]
    Npn,
    #[serde(rename = "NI")]
    Ni,
}

impl Class3 {
    pub const ALL: [Class3; 3] = [Class3::Ypy, Class3::Npn, Class3::Ni];

    /// `None` for `NotApplicable`.
    pub fn from_answer(a: Answer) -> Option<Class3> {
        match a {
            Answer::Yes | Answer::ProbablyYes => Some(Class3::Ypy),
            Answer::No | Answer::ProbablyNo => Some(Class3::Npn),
            Answer::NoInformation => Some(Class3::Ni),
            Answer::NotApplicable => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class3::Ypy => "Y/PY",
            Class3::Npn => "N/PN",
            Class3::Ni => "NI",
        }
    }
}

impl fmt::Display for Class3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class3 {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "Y/PY" | "YPY" => Ok(Class3::Ypy),
            "N/PN" | "NPN" => Ok(Class3::Npn),
            "NI" => Ok(Class3::Ni),
            _ => s.parse::<Answer>().ok().and_then(Class3::from_answer).ok_or_else(|| format!("unknown class {s:?}")),
        }
    }
}

/// Three-way aggregation plus `NotApplicable`, used for agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class4 {
    #[serde(rename = "Y/PY")]
    Ypy,
    #[serde(rename = "N/PN")]
    Npn,
    #[serde(rename = "NI")]
    Ni,
    #[serde(rename = "NA")]
    Na,
}

impl Class4 {
    pub const ALL: [Class4; 4] = [Class4::Ypy, Class4::Npn, Class4::Ni, Class4::Na];

    pub fn from_answer(a: Answer) -> Class4 {
        match Class3::from_answer(a) {
            Some(Class3::Ypy) => Class4::Ypy,
            Some(Class3::Npn) => Class4::Npn,
            Some(Class3::Ni) => Class4::Ni,
            None => Class4::Na,
        }
    }
}
