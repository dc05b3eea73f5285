//! Independent reference implementations shared by the integration tests
//! and the acceptance report. Nothing here uses the library's rule, metric
//! or prompt code paths.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rob2_core::document::ingest_document;
use rob2_core::evaluation::{cohens_kappa_4class, f1_scores, severity_breakdown, Class3, Class4, ScoredPair, SeverityLayout};
use rob2_core::qa::{build_fewshot_prompt, build_prompt, full_paper_passages, ContextMode, FewShotExample};
use rob2_core::questionnaire::{Answer, Qid, Questionnaire};
use rob2_core::rob_logic::{gate_consistent_assignments, validate_rule_table, RiskLevel, RuleSet};
use serde::Deserialize;
use serde_json::Value;

use Answer::*;
use Class3::{Ni, Npn as N, Ypy as Y};
use RiskLevel::*;

pub const RAW_TABLES: [&str; 5] = [
    include_str!("../../data/rules/domain1.json"),
    include_str!("../../data/rules/domain2.json"),
    include_str!("../../data/rules/domain3.json"),
    include_str!("../../data/rules/domain4.json"),
    include_str!("../../data/rules/domain5.json"),
];

fn q(s: &str) -> Qid {
    s.parse().unwrap()
}

// Walks the raw JSON tree with no use of the library's rule types.
pub fn json_walk(tree: &Value, answers: &BTreeMap<Qid, Answer>) -> Option<&'static str> {
    let mut node = tree;
    loop {
        if let Some(r) = node.get("risk") {
            return match r.as_str()? {
                "low" => Some("low"),
                "some_concerns" => Some("some_concerns"),
                "high" => Some("high"),
                _ => None,
            };
        }
        let d = &node["node"];
        let qid = q(d["qid"].as_str()?);
        let label = serde_json::to_value(answers.get(&qid)?).ok()?;
        let mut matching = d["branches"].as_array()?.iter().filter(|b| b["classes"].as_array().unwrap().contains(&label));
        let branch = matching.next()?;
        assert!(matching.next().is_none(), "overlapping branches at {qid}");
        node = &branch["next"];
    }
}

pub fn ypy(a: Answer) -> bool {
    matches!(a, Yes | ProbablyYes)
}

pub fn npn(a: Answer) -> bool {
    matches!(a, No | ProbablyNo)
}

// The published domain algorithms, stated as their judgment criteria.
pub fn official(domain: u8, ans: &BTreeMap<Qid, Answer>) -> RiskLevel {
    let a = |s: &str| ans[&q(s)];
    match domain {
        1 => {
            if npn(a("1.2")) || (a("1.2") == NoInformation && ypy(a("1.3"))) {
                High
            } else if ypy(a("1.2")) && !npn(a("1.1")) && !ypy(a("1.3")) {
                Low
            } else {
                SomeConcerns
            }
        }
        2 => {
            let part1 = if (npn(a("2.1")) && npn(a("2.2"))) || npn(a("2.3")) {
                Low
            } else if a("2.3") == NoInformation || npn(a("2.4")) || ypy(a("2.5")) {
                SomeConcerns
            } else {
                High
            };
            let part2 = if ypy(a("2.6")) {
                Low
            } else if npn(a("2.7")) {
                SomeConcerns
            } else {
                High
            };
            part1.max(part2)
        }
        3 => {
            if ypy(a("3.1")) || ypy(a("3.2")) || npn(a("3.3")) {
                Low
            } else if a("3.2") == NoInformation || npn(a("3.4")) {
                SomeConcerns
            } else {
                High
            }
        }
        4 => {
            if ypy(a("4.1")) || ypy(a("4.2")) {
                High
            } else if npn(a("4.3")) || npn(a("4.4")) {
                if npn(a("4.2")) {
                    Low
                } else {
                    SomeConcerns
                }
            } else if npn(a("4.5")) {
                SomeConcerns
            } else {
                High
            }
        }
        5 => {
            if ypy(a("5.2")) || ypy(a("5.3")) {
                High
            } else if ypy(a("5.1")) && npn(a("5.2")) && npn(a("5.3")) {
                Low
            } else {
                SomeConcerns
            }
        }
        _ => unreachable!(),
    }
}

pub fn idx(c: Class3) -> usize {
    match c {
        Y => 0,
        N => 1,
        Ni => 2,
    }
}

pub struct Brute {
    pub micro: f64,
    pub per_class: [Option<f64>; 3],
    pub macro_per_class: f64,
    pub macro_per_question: f64,
    pub severity: [[usize; 5]; 3],
    pub alternative: [[usize; 5]; 3],
}

// Confusion-matrix formulation with F1 = 2PR / (P + R).
pub fn brute(pairs: &[ScoredPair]) -> Brute {
    let mut m = [[0usize; 3]; 3];
    for p in pairs {
        m[idx(p.gold)][idx(p.pred)] += 1;
    }
    let mut per_class = [None; 3];
    let (mut stp, mut sfp) = (0, 0);
    for c in 0..3 {
        let tp = m[c][c];
        let fp: usize = (0..3).filter(|&g| g != c).map(|g| m[g][c]).sum();
        let fn_: usize = (0..3).filter(|&p| p != c).map(|p| m[c][p]).sum();
        stp += tp;
        sfp += fp;
        if tp + fp + fn_ > 0 {
            let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            per_class[c] = Some(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) });
        }
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let mut groups: BTreeMap<Qid, (usize, usize)> = BTreeMap::new();
    for p in pairs {
        let g = groups.entry(p.qid).or_default();
        g.0 += usize::from(p.gold == p.pred);
        g.1 += 1;
    }
    // Class 1 when NI is on either side, class 2 otherwise.
    let sev = |g: usize, p: usize| if g == 2 || p == 2 { 0 } else { 1 };
    let mut severity = [[0usize; 5]; 3];
    let mut alternative = [[0usize; 5]; 3];
    let alts = [[2, 1], [2, 0], [1, 0]];
    for c in 0..3 {
        severity[c][0] = m[c][c];
        alternative[c][0] = m[c][c];
        for o in (0..3).filter(|&o| o != c) {
            severity[c][1 + sev(o, c)] += m[o][c];
            severity[c][3 + sev(c, o)] += m[c][o];
            let col = alts[c].iter().position(|&a| a == o).unwrap();
            alternative[c][1 + col] += m[o][c];
            alternative[c][3 + col] += m[c][o];
        }
    }
    Brute {
        micro: stp as f64 / (stp + sfp) as f64,
        per_class,
        macro_per_class: present.iter().sum::<f64>() / present.len() as f64,
        macro_per_question: groups.values().map(|(h, n)| *h as f64 / *n as f64).sum::<f64>() / groups.len() as f64,
        severity,
        alternative,
    }
}

pub fn brute_kappa(a: &[Class4], b: &[Class4]) -> f64 {
    let i = |c: Class4| Class4::ALL.iter().position(|x| *x == c).unwrap();
    let mut m = [[0f64; 4]; 4];
    for (x, y) in a.iter().zip(b) {
        m[i(*x)][i(*y)] += 1.0;
    }
    let n = a.len() as f64;
    let po = (0..4).map(|k| m[k][k]).sum::<f64>() / n;
    let pe = (0..4).map(|k| m[k].iter().sum::<f64>() * (0..4).map(|r| m[r][k]).sum::<f64>()).sum::<f64>() / (n * n);
    if pe == 1.0 {
        1.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}

pub fn random_class(rng: &mut ChaCha8Rng) -> Class3 {
    Class3::ALL[rng.random_range(0..3)]
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Validates every bundled table and compares the engine with the raw tree
/// walk and the published criteria on every gate-consistent combination.
/// Returns the number of combinations checked.
pub fn check_rule_engine() -> Result<usize, String> {
    let qn = Questionnaire::bundled();
    let rules = RuleSet::bundled();
    for t in rules.tables() {
        let issues = validate_rule_table(t, &qn);
        if !issues.is_empty() {
            return Err(format!("domain {}: {issues:?}", t.domain));
        }
    }
    let mut combos = 0;
    for d in 1..=5u8 {
        let tree: Value = serde_json::from_str(RAW_TABLES[d as usize - 1]).map_err(|e| e.to_string())?;
        for ans in gate_consistent_assignments(&qn, d) {
            combos += 1;
            let got = rules.domain_judgment(&qn, d, &ans).map_err(|e| e.to_string())?;
            if Some(got.as_str()) != json_walk(&tree["tree"], &ans) || got != official(d, &ans) {
                return Err(format!("domain {d}: {ans:?} gave {got:?}"));
            }
        }
    }
    Ok(combos)
}

/// Compares F1, severity tables and kappa with the brute-force versions on
/// `runs` seeded random runs.
pub fn check_metrics(runs: u64) -> Result<(), String> {
    let qids = ["1.1", "1.2", "2.3", "3.1", "4.4", "5.2"];
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..40);
        let pairs: Vec<ScoredPair> = (0..n)
            .map(|_| {
                let qid = qids[rng.random_range(0..qids.len())].parse().unwrap();
                ScoredPair { qid, gold: random_class(&mut rng), pred: random_class(&mut rng) }
            })
            .collect();
        let got = f1_scores(&pairs).map_err(|e| e.to_string())?;
        let want = brute(&pairs);
        let fail = |what: &str| Err(format!("seed {seed}: {what}"));
        if !close(got.micro, want.micro) {
            return fail("micro");
        }
        if !close(got.macro_per_class, want.macro_per_class) {
            return fail("macro per class");
        }
        if !close(got.macro_per_question, want.macro_per_question) {
            return fail("macro per question");
        }
        for c in Class3::ALL {
            let a = got.per_class.get(&c).map(|s| s.f1);
            let b = want.per_class[idx(c)];
            if a.is_some() != b.is_some() || a.zip(b).is_some_and(|(a, b)| !close(a, b)) {
                return fail("per-class F1");
            }
        }
        let t = severity_breakdown(&pairs);
        for c in Class3::ALL {
            if t.values(c, SeverityLayout::BySeverity) != want.severity[idx(c)]
                || t.values(c, SeverityLayout::ByAlternative) != want.alternative[idx(c)]
            {
                return fail("severity table");
            }
        }
        let a: Vec<Class4> = (0..n).map(|_| Class4::ALL[rng.random_range(0..4)]).collect();
        let b: Vec<Class4> = (0..n).map(|_| Class4::ALL[rng.random_range(0..4)]).collect();
        if !close(cohens_kappa_4class(&a, &b).map_err(|e| e.to_string())?, brute_kappa(&a, &b)) {
            return fail("kappa");
        }
    }
    Ok(())
}

#[derive(Deserialize)]
pub struct PromptInputs {
    pub oracle_passage: String,
    pub ranked_passages: Vec<String>,
    pub fewshot_examples: Vec<FewShotExample>,
}

pub fn prompt_inputs() -> PromptInputs {
    serde_json::from_str(include_str!("../fixtures/prompt_inputs.json")).unwrap()
}

/// Renders every question in every context mode and compares the bytes
/// with the files in `goldens`. Returns the number of files compared.
pub fn check_goldens(goldens: &Path) -> Result<usize, String> {
    let qn = Questionnaire::bundled();
    let inp = prompt_inputs();
    let doc = ingest_document(include_bytes!("../fixtures/trial.json")).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for q in qn.questions() {
        let renders = [
            ("oracle", build_prompt(q, ContextMode::Oracle, std::slice::from_ref(&inp.oracle_passage))),
            ("topk1", build_prompt(q, ContextMode::TopK(1), &inp.ranked_passages[..1])),
            ("topk3", build_prompt(q, ContextMode::TopK(3), &inp.ranked_passages[..3])),
            ("topk5", build_prompt(q, ContextMode::TopK(5), &inp.ranked_passages[..5])),
            ("full", build_prompt(q, ContextMode::FullPaper, &full_paper_passages(&doc))),
            (
                "fewshot",
                build_fewshot_prompt(q, ContextMode::TopK(1), &inp.ranked_passages[..1], &inp.fewshot_examples, &BTreeSet::new()),
            ),
        ];
        for (mode, text) in renders {
            let text = text.map_err(|e| format!("{} {mode}: {e}", q.qid))?;
            let path = goldens.join(format!("{}_{mode}.txt", q.qid));
            let golden = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            if text.as_bytes() != golden.as_slice() {
                return Err(format!("{} {mode} differs from golden", q.qid));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
