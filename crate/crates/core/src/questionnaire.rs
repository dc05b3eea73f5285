//! The ROB2 instrument: domains, signaling questions and cascade gates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Expected number of signaling questions in domains 1 through 5.
pub const DOMAIN_SIZES: [usize; 5] = [3, 7, 4, 5, 3];

pub const DOMAINS: std::ops::RangeInclusive<u8> = 1..=5;

const BUNDLED: &str = include_str!("../data/questionnaire.json");

/// Response to a signaling question.
///
/// `NotApplicable` is never produced by the answer parser or by a reviewer;
/// it is assigned only when a cascade gate switches a question off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    ProbablyYes,
    ProbablyNo,
    No,
    NoInformation,
    NotApplicable,
}

impl Answer {
    /// The five options a model or reviewer may choose.
    pub const RESPONSES: [Answer; 5] = [
        Answer::Yes,
        Answer::ProbablyYes,
        Answer::ProbablyNo,
        Answer::No,
        Answer::NoInformation,
    ];

    /// Lower-case label used in prompts.
    pub fn label(self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::ProbablyYes => "probably yes",
            Answer::ProbablyNo => "probably no",
            Answer::No => "no",
            Answer::NoInformation => "no information",
            Answer::NotApplicable => "not applicable",
        }
    }

    pub fn abbreviation(self) -> &'static str {
        match self {
            Answer::Yes => "Y",
            Answer::ProbablyYes => "PY",
            Answer::ProbablyNo => "PN",
            Answer::No => "N",
            Answer::NoInformation => "NI",
            Answer::NotApplicable => "NA",
        }
    }

    pub fn is_response(self) -> bool {
        self != Answer::NotApplicable
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

impl FromStr for Answer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', '-'], " ");
        Ok(match norm.as_str() {
            "y" | "yes" => Answer::Yes,
            "py" | "probably yes" => Answer::ProbablyYes,
            "pn" | "probably no" => Answer::ProbablyNo,
            "n" | "no" => Answer::No,
            "ni" | "no information" => Answer::NoInformation,
            "na" | "n/a" | "not applicable" => Answer::NotApplicable,
            _ => return Err(format!("unknown answer {s:?}")),
        })
    }
}

/// Signaling question identifier of the form `"D.N"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Qid {
    domain: u8,
    number: u8,
}

impl Qid {
    pub fn new(domain: u8, number: u8) -> Self {
        Qid { domain, number }
    }

    pub fn domain(self) -> u8 {
        self.domain
    }

    pub fn number(self) -> u8 {
        self.number
    }
}

impl fmt::Display for Qid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.domain, self.number)
    }
}

impl FromStr for Qid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (d, n) = s.trim().split_once('.').ok_or_else(|| format!("invalid qid {s:?}"))?;
        let domain = d.parse::<u8>().map_err(|_| format!("invalid qid {s:?}"))?;
        let number = n.parse::<u8>().map_err(|_| format!("invalid qid {s:?}"))?;
        if number == 0 {
            return Err(format!("invalid qid {s:?}"));
        }
        Ok(Qid { domain, number })
    }
}

impl Serialize for Qid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Qid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combinator {
    Any,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Antecedent {
    pub qid: Qid,
    pub allowed: BTreeSet<Answer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeGate {
    pub combinator: Combinator,
    pub antecedents: Vec<Antecedent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalingQuestion {
    pub qid: Qid,
    pub domain: u8,
    pub text: String,
    pub elaboration: String,
    #[serde(default)]
    pub gate: Option<CascadeGate>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuestionnaireError {
    #[error("cannot read questionnaire: {0}")]
    Io(String),
    #[error("malformed questionnaire: {0}")]
    Parse(String),
    #[error("question {qid}: {reason}")]
    Invalid { qid: String, reason: String },
    #[error("domain {domain} expects {expected} questions, found {found}")]
    DomainSize { domain: u8, expected: usize, found: usize },
    #[error("question {qid}: cross-domain gate on {antecedent}")]
    CrossDomainGate { qid: Qid, antecedent: Qid },
    #[error("question {qid}: gate antecedent {antecedent} does not precede it")]
    GateOrder { qid: Qid, antecedent: Qid },
    #[error("question {qid}: gate antecedent {antecedent} is not answered yet")]
    Sequencing { qid: Qid, antecedent: Qid },
    #[error("question {0} is active but has no answer")]
    MissingAnswer(Qid),
    #[error("unknown question {0}")]
    UnknownQuestion(Qid),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum QuestionnaireFile {
    Versioned { version: String, questions: Vec<SignalingQuestion> },
    Bare(Vec<SignalingQuestion>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Questionnaire {
    pub version: String,
    questions: Vec<SignalingQuestion>,
}

impl Questionnaire {
    /// The instrument shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled questionnaire is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, QuestionnaireError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| QuestionnaireError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, QuestionnaireError> {
        let file: QuestionnaireFile =
            serde_json::from_str(text).map_err(|e| QuestionnaireError::Parse(e.to_string()))?;
        let (version, questions) = match file {
            QuestionnaireFile::Versioned { version, questions } => (version, questions),
            QuestionnaireFile::Bare(questions) => ("unversioned".to_owned(), questions),
        };
        Self::new(version, questions)
    }

    /// Validates and orders the questions.
    pub fn new(version: String, mut questions: Vec<SignalingQuestion>) -> Result<Self, QuestionnaireError> {
        let mut seen = BTreeSet::new();
        for q in &questions {
            let invalid = |reason: &str| QuestionnaireError::Invalid { qid: q.qid.to_string(), reason: reason.into() };
            if !seen.insert(q.qid) {
                return Err(invalid("duplicate qid"));
            }
            if q.domain != q.qid.domain() {
                return Err(invalid("domain does not match qid prefix"));
            }
            if !DOMAINS.contains(&q.domain) {
                return Err(invalid("domain outside 1..5"));
            }
            if q.text.trim().is_empty() {
                return Err(invalid("empty question text"));
            }
            if q.elaboration.trim().is_empty() {
                return Err(invalid("empty elaboration"));
            }
        }
        questions.sort_by_key(|q| q.qid);
        for q in &questions {
            let Some(gate) = &q.gate else { continue };
            if gate.antecedents.is_empty() {
                return Err(QuestionnaireError::Invalid { qid: q.qid.to_string(), reason: "gate without antecedents".into() });
            }
            for a in &gate.antecedents {
                if a.qid.domain() != q.qid.domain() {
                    return Err(QuestionnaireError::CrossDomainGate { qid: q.qid, antecedent: a.qid });
                }
                if a.qid >= q.qid || !seen.contains(&a.qid) {
                    return Err(QuestionnaireError::GateOrder { qid: q.qid, antecedent: a.qid });
                }
            }
        }
        for (i, expected) in DOMAIN_SIZES.iter().enumerate() {
            let domain = i as u8 + 1;
            let found = questions.iter().filter(|q| q.domain == domain).count();
            if found != *expected {
                return Err(QuestionnaireError::DomainSize { domain, expected: *expected, found });
            }
        }
        Ok(Questionnaire { version, questions })
    }

    pub fn questions(&self) -> &[SignalingQuestion] {
        &self.questions
    }

    pub fn get(&self, qid: Qid) -> Option<&SignalingQuestion> {
        self.questions.iter().find(|q| q.qid == qid)
    }

    pub fn domain(&self, domain: u8) -> impl Iterator<Item = &SignalingQuestion> {
        self.questions.iter().filter(move |q| q.domain == domain)
    }

    pub fn qids(&self) -> impl Iterator<Item = Qid> + '_ {
        self.questions.iter().map(|q| q.qid)
    }

    /// Whether `qid` is switched on given the earlier answers.
    pub fn is_active(&self, qid: Qid, answers: &BTreeMap<Qid, Answer>) -> Result<bool, QuestionnaireError> {
        let q = self.get(qid).ok_or(QuestionnaireError::UnknownQuestion(qid))?;
        is_active(q, answers)
    }

    /// Gate-consistent activation of every question in the domain, in qid
    /// order. Missing answers to switched-off questions are read as
    /// `NotApplicable`; a missing answer to a switched-on question is a
    /// sequencing error naming it.
    pub fn resolve_domain(
        &self,
        domain: u8,
        answers: &BTreeMap<Qid, Answer>,
    ) -> Result<BTreeMap<Qid, Answer>, QuestionnaireError> {
        let mut resolved = BTreeMap::new();
        for q in self.domain(domain) {
            if is_active(q, &resolved)? {
                match answers.get(&q.qid) {
                    Some(a) => resolved.insert(q.qid, *a),
                    None => return Err(QuestionnaireError::MissingAnswer(q.qid)),
                };
            } else {
                resolved.insert(q.qid, Answer::NotApplicable);
            }
        }
        Ok(resolved)
    }
}

/// True iff the question has no gate or its gate is satisfied.
///
/// A `NotApplicable` antecedent never satisfies an admissible set unless the
/// set lists it explicitly, so a switched-off question cannot switch on its
/// dependents. Missing antecedents are tolerated when the known ones already
/// decide the gate (one hit for `Any`, one miss for `All`).
pub fn is_active(q: &SignalingQuestion, answers: &BTreeMap<Qid, Answer>) -> Result<bool, QuestionnaireError> {
    let Some(gate) = &q.gate else { return Ok(true) };
    let decisive = matches!(gate.combinator, Combinator::Any);
    let mut missing = None;
    for a in &gate.antecedents {
        match answers.get(&a.qid) {
            Some(answer) if a.allowed.contains(answer) == decisive => return Ok(decisive),
            Some(_) => {}
            None => missing = missing.or(Some(a.qid)),
        }
    }
    match missing {
        Some(antecedent) => Err(QuestionnaireError::Sequencing { qid: q.qid, antecedent }),
        None => Ok(!decisive),
    }
}
