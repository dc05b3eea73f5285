//! Flowchart engine for domain-level and overall risk-of-bias judgments.
//!
//! Each domain's flowchart is a decision tree stored as JSON. Internal nodes
//! test one signaling question and route on disjoint answer sets; leaves carry
//! a [`RiskLevel`]:
//!
//! ```json
//! {"node": {"qid": "4.1", "branches": [
//!     {"classes": ["yes", "probably_yes"], "next": {"risk": "high"}},
//!     {"classes": ["no", "probably_no", "no_information"], "next": {"node": ...}}]}}
//! ```
//!
//! Answers to switched-off questions are `not_applicable`. A tree only needs
//! to route that value on nodes that can actually be reached with the
//! question switched off; [`validate_rule_table`] finds every reachable gap by
//! enumerating all gate-consistent answer combinations of the domain.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::questionnaire::{is_active, Answer, Qid, Questionnaire, QuestionnaireError, DOMAINS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskLevel {
    Low,
    SomeConcerns,
    High,
}

impl RiskLevel {
    pub const ALL: [RiskLevel; 3] = [RiskLevel::Low, RiskLevel::SomeConcerns, RiskLevel::High];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskLevel::Low => "low",
            RiskLevel::SomeConcerns => "some_concerns",
            RiskLevel::High => "high",
        }
    }
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RuleNode {
    Decision { node: Decision },
    Leaf { risk: RiskLevel },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub qid: Qid,
    pub branches: Vec<Branch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub classes: BTreeSet<Answer>,
    pub next: RuleNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTable {
    pub domain: u8,
    #[serde(default)]
    pub provenance: String,
    pub tree: RuleNode,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error(transparent)]
    Sequencing(#[from] QuestionnaireError),
    #[error("domain {domain}: no rule covers {combination}")]
    Totality { domain: u8, combination: String },
    #[error("no rule table for domain {0}")]
    MissingTable(u8),
    #[error("malformed rule file: {0}")]
    Parse(String),
}

/// A finding from [`validate_rule_table`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleIssue {
    CrossDomain { qid: Qid },
    UnknownQuestion { qid: Qid },
    Overlap { qid: Qid, answer: Answer },
    Gap { qid: Qid, answer: Answer, combination: String },
    EmptyBranches { qid: Qid },
}

impl fmt::Display for RuleIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleIssue::CrossDomain { qid } => write!(f, "cross-domain node on {qid}"),
            RuleIssue::UnknownQuestion { qid } => write!(f, "node tests unknown question {qid}"),
            RuleIssue::Overlap { qid, answer } => write!(f, "overlap at {qid}: {answer} routed twice"),
            RuleIssue::Gap { qid, answer, combination } => {
                write!(f, "gap at {qid}: {answer} unrouted (reached by {combination})")
            }
            RuleIssue::EmptyBranches { qid } => write!(f, "node {qid} has no branches"),
        }
    }
}

pub(crate) fn describe(answers: &BTreeMap<Qid, Answer>) -> String {
    answers.iter().map(|(q, a)| format!("{q}={a}")).collect::<Vec<_>>().join(", ")
}

impl RuleTable {
    pub fn from_json(text: &str) -> Result<Self, RuleError> {
        serde_json::from_str(text).map_err(|e| RuleError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RuleError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| RuleError::Parse(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    /// Walks the tree on already gate-resolved answers.
    fn walk(&self, answers: &BTreeMap<Qid, Answer>) -> Result<RiskLevel, RuleError> {
        let mut node = &self.tree;
        loop {
            match node {
                RuleNode::Leaf { risk } => return Ok(*risk),
                RuleNode::Decision { node: d } => {
                    let answer = answers.get(&d.qid).copied().ok_or_else(|| RuleError::Totality {
                        domain: self.domain,
                        combination: format!("{} (no answer for {})", describe(answers), d.qid),
                    })?;
                    node = &d
                        .branches
                        .iter()
                        .find(|b| b.classes.contains(&answer))
                        .ok_or_else(|| RuleError::Totality { domain: self.domain, combination: describe(answers) })?
                        .next;
                }
            }
        }
    }

    /// Domain judgment for the given answers. Every switched-on question of
    /// the domain must be answered; switched-off ones may be absent or
    /// `NotApplicable`.
    pub fn judge(&self, questionnaire: &Questionnaire, answers: &BTreeMap<Qid, Answer>) -> Result<RiskLevel, RuleError> {
        let resolved = questionnaire.resolve_domain(self.domain, answers)?;
        self.walk(&resolved)
    }
}

/// Every answer combination for the domain that respects the cascade gates:
/// switched-on questions range over the five responses, switched-off ones
/// are `NotApplicable`.
pub fn gate_consistent_assignments(questionnaire: &Questionnaire, domain: u8) -> Vec<BTreeMap<Qid, Answer>> {
    let questions: Vec<_> = questionnaire.domain(domain).collect();
    let mut out = vec![BTreeMap::new()];
    for q in questions {
        let mut next = Vec::with_capacity(out.len() * 5);
        for partial in out {
            if is_active(q, &partial).expect("antecedents precede dependents") {
                for a in Answer::RESPONSES {
                    let mut m = partial.clone();
                    m.insert(q.qid, a);
                    next.push(m);
                }
            } else {
                let mut m = partial;
                m.insert(q.qid, Answer::NotApplicable);
                next.push(m);
            }
        }
        out = next;
    }
    out
}

/// Checks the table for cross-domain nodes, overlapping branches and
/// reachable gaps. Empty iff the table is total and deterministic over all
/// gate-consistent answer combinations.
pub fn validate_rule_table(table: &RuleTable, questionnaire: &Questionnaire) -> Vec<RuleIssue> {
    let mut issues = Vec::new();
    let mut stack = vec![&table.tree];
    while let Some(node) = stack.pop() {
        let RuleNode::Decision { node: d } = node else { continue };
        if d.qid.domain() != table.domain {
            issues.push(RuleIssue::CrossDomain { qid: d.qid });
        } else if questionnaire.get(d.qid).is_none() {
            issues.push(RuleIssue::UnknownQuestion { qid: d.qid });
        }
        if d.branches.is_empty() {
            issues.push(RuleIssue::EmptyBranches { qid: d.qid });
        }
        let mut seen = BTreeSet::new();
        for b in &d.branches {
            for a in &b.classes {
                if !seen.insert(*a) {
                    issues.push(RuleIssue::Overlap { qid: d.qid, answer: *a });
                }
            }
            stack.push(&b.next);
        }
    }
    if !issues.is_empty() {
        return issues;
    }

    let mut reported = BTreeSet::new();
    for combo in gate_consistent_assignments(questionnaire, table.domain) {
        let mut node = &table.tree;
        while let RuleNode::Decision { node: d } = node {
            let answer = combo[&d.qid];
            match d.branches.iter().find(|b| b.classes.contains(&answer)) {
                Some(b) => node = &b.next,
                None => {
                    if reported.insert((d.qid, answer)) {
                        issues.push(RuleIssue::Gap { qid: d.qid, answer, combination: describe(&combo) });
                    }
                    break;
                }
            }
        }
    }
    issues
}

/// Combines the five domain judgments.
///
/// The default policy takes the worst domain. With `escalate_after = Some(m)`,
/// `m` or more domains at some concerns also yield high.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverallRule {
    #[serde(default)]
    pub escalate_after: Option<usize>,
}

impl OverallRule {
    pub fn judge(&self, domains: &[RiskLevel; 5]) -> RiskLevel {
        let worst = domains.iter().copied().max().unwrap_or(RiskLevel::Low);
        if worst == RiskLevel::High {
            return RiskLevel::High;
        }
        let concerns = domains.iter().filter(|&&d| d == RiskLevel::SomeConcerns).count();
        match self.escalate_after {
            Some(m) if m > 0 && concerns >= m => RiskLevel::High,
            _ => worst,
        }
    }
}

pub fn overall_judgment(domains: &[RiskLevel; 5], rule: &OverallRule) -> RiskLevel {
    rule.judge(domains)
}

/// The five domain tables together with the overall policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    tables: BTreeMap<u8, RuleTable>,
    pub overall: OverallRule,
}

const BUNDLED_RULES: [&str; 5] = [
    include_str!("../data/rules/domain1.json"),
    include_str!("../data/rules/domain2.json"),
    include_str!("../data/rules/domain3.json"),
    include_str!("../data/rules/domain4.json"),
    include_str!("../data/rules/domain5.json"),
];

/// Domain and overall judgments for one assessment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgments {
    pub domains: [RiskLevel; 5],
    pub overall: RiskLevel,
}

impl RuleSet {
    pub fn bundled() -> Self {
        let tables = BUNDLED_RULES
            .iter()
            .map(|t| {
                let table = RuleTable::from_json(t).expect("bundled rule table parses");
                (table.domain, table)
            })
            .collect();
        RuleSet { tables, overall: OverallRule::default() }
    }

    pub fn new(tables: impl IntoIterator<Item = RuleTable>, overall: OverallRule) -> Result<Self, RuleError> {
        let tables: BTreeMap<u8, RuleTable> = tables.into_iter().map(|t| (t.domain, t)).collect();
        for d in DOMAINS {
            if !tables.contains_key(&d) {
                return Err(RuleError::MissingTable(d));
            }
        }
        Ok(RuleSet { tables, overall })
    }

    /// Loads `domain1.json` .. `domain5.json` from a directory.
    pub fn load_dir(dir: impl AsRef<Path>, overall: OverallRule) -> Result<Self, RuleError> {
        let tables = DOMAINS
            .map(|d| RuleTable::load(dir.as_ref().join(format!("domain{d}.json"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(tables, overall)
    }

    pub fn table(&self, domain: u8) -> Option<&RuleTable> {
        self.tables.get(&domain)
    }

    pub fn tables(&self) -> impl Iterator<Item = &RuleTable> {
        self.tables.values()
    }

    pub fn domain_judgment(
        &self,
        questionnaire: &Questionnaire,
        domain: u8,
        answers: &BTreeMap<Qid, Answer>,
    ) -> Result<RiskLevel, RuleError> {
        self.table(domain).ok_or(RuleError::MissingTable(domain))?.judge(questionnaire, answers)
    }

    pub fn judge(&self, questionnaire: &Questionnaire, answers: &BTreeMap<Qid, Answer>) -> Result<Judgments, RuleError> {
        let mut domains = [RiskLevel::Low; 5];
        for d in DOMAINS {
            domains[d as usize - 1] = self.domain_judgment(questionnaire, d, answers)?;
        }
        Ok(Judgments { domains, overall: self.overall.judge(&domains) })
    }

    /// Judgments for the domains whose questions are all answered; `None`
    /// where the domain is incomplete.
    pub fn partial(&self, questionnaire: &Questionnaire, answers: &BTreeMap<Qid, Answer>) -> [Option<RiskLevel>; 5] {
        let mut out = [None; 5];
        for d in DOMAINS {
            out[d as usize - 1] = self.domain_judgment(questionnaire, d, answers).ok();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use RiskLevel::*;

    fn q(s: &str) -> Qid {
        s.parse().unwrap()
    }

    fn set(answers: &[Answer]) -> BTreeSet<Answer> {
        answers.iter().copied().collect()
    }

    #[test]
    fn bundled_tables_validate() {
        let qn = Questionnaire::bundled();
        let rules = RuleSet::bundled();
        for t in rules.tables() {
            let issues = validate_rule_table(t, &qn);
            assert!(issues.is_empty(), "domain {}: {:?}", t.domain, issues);
        }
    }

    #[test]
    fn overall_policy() {
        let r = OverallRule::default();
        assert_eq!(r.judge(&[High, High, High, Low, Low]), High);
        assert_eq!(r.judge(&[Low; 5]), Low);
        assert_eq!(r.judge(&[SomeConcerns, Low, Low, Low, Low]), SomeConcerns);
        let esc = OverallRule { escalate_after: Some(3) };
        assert_eq!(esc.judge(&[SomeConcerns, SomeConcerns, Low, Low, Low]), SomeConcerns);
        assert_eq!(esc.judge(&[SomeConcerns, SomeConcerns, SomeConcerns, Low, Low]), High);
    }

    #[test]
    fn missing_answer_is_sequencing_error() {
        let qn = Questionnaire::bundled();
        let rules = RuleSet::bundled();
        let answers: BTreeMap<Qid, Answer> = [(q("4.2"), Answer::No)].into_iter().collect();
        let err = rules.domain_judgment(&qn, 4, &answers).unwrap_err();
        assert_eq!(err, RuleError::Sequencing(QuestionnaireError::MissingAnswer(q("4.1"))));
    }

    #[test]
    fn gated_questions_may_be_omitted() {
        let qn = Questionnaire::bundled();
        let rules = RuleSet::bundled();
        let answers: BTreeMap<Qid, Answer> = [(q("4.1"), Answer::Yes), (q("4.2"), Answer::No)].into_iter().collect();
        assert_eq!(rules.domain_judgment(&qn, 4, &answers).unwrap(), High);
    }

    #[test]
    fn gap_is_reported() {
        let qn = Questionnaire::bundled();
        let table = RuleTable {
            domain: 5,
            provenance: String::new(),
            tree: RuleNode::Decision {
                node: Decision {
                    qid: q("5.1"),
                    branches: vec![
                        Branch { classes: set(&[Answer::Yes]), next: RuleNode::Leaf { risk: Low } },
                        Branch {
                            classes: set(&[Answer::ProbablyYes, Answer::ProbablyNo]),
                            next: RuleNode::Leaf { risk: High },
                        },
                    ],
                },
            },
        };
        let issues = validate_rule_table(&table, &qn);
        let gaps: BTreeSet<Answer> = issues
            .iter()
            .filter_map(|i| match i {
                RuleIssue::Gap { answer, .. } => Some(*answer),
                _ => None,
            })
            .collect();
        assert_eq!(gaps, set(&[Answer::No, Answer::NoInformation]));
        let combo: BTreeMap<Qid, Answer> =
            [(q("5.1"), Answer::No), (q("5.2"), Answer::No), (q("5.3"), Answer::No)].into_iter().collect();
        assert!(matches!(table.judge(&qn, &combo), Err(RuleError::Totality { domain: 5, .. })));
    }

    #[test]
    fn cross_domain_node_is_reported() {
        let qn = Questionnaire::bundled();
        let table = RuleTable {
            domain: 4,
            provenance: String::new(),
            tree: RuleNode::Decision {
                node: Decision {
                    qid: q("3.1"),
                    branches: vec![Branch { classes: Answer::RESPONSES.into_iter().collect(), next: RuleNode::Leaf { risk: Low } }],
                },
            },
        };
        let issues = validate_rule_table(&table, &qn);
        assert_eq!(issues, vec![RuleIssue::CrossDomain { qid: q("3.1") }]);
        assert!(issues[0].to_string().contains("cross-domain"));
    }

    #[test]
    fn enumeration_respects_gates() {
        let qn = Questionnaire::bundled();
        // Domain 1 has no gates.
        assert_eq!(gate_consistent_assignments(&qn, 1).len(), 125);
        for combo in gate_consistent_assignments(&qn, 4) {
            let on = combo[&q("4.1")] != Answer::Yes
                && combo[&q("4.1")] != Answer::ProbablyYes
                && combo[&q("4.2")] != Answer::Yes
                && combo[&q("4.2")] != Answer::ProbablyYes;
            assert_eq!(combo[&q("4.3")] != Answer::NotApplicable, on);
        }
    }
}
