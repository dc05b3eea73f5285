use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Class3, Class4, EvaluationError};
use crate::questionnaire::Qid;

/// One scored question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub qid: Qid,
    pub gold: Class3,
    pub pred: Class3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// F1 summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub n: usize,
    pub n_per_domain: [usize; 5],
    /// Pooled F1 over each domain's questions; `None` for a domain with no
    /// scored items.
    pub domain_micro: [Option<f64>; 5],
    pub micro: f64,
    /// Unweighted mean of per-class F1. Classes absent from both gold and
    /// predictions are left out of the mean.
    pub macro_per_class: f64,
    /// Unweighted mean over signaling questions of each question's pooled F1.
    pub macro_per_question: f64,
    /// Only classes that occur in gold or predictions.
    pub per_class: BTreeMap<Class3, ClassScore>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn accuracy<'a>(pairs: impl IntoIterator<Item = &'a ScoredPair>) -> Option<f64> {
    let (mut hit, mut n) = (0, 0);
    for p in pairs {
        n += 1;
        hit += usize::from(p.gold == p.pred);
    }
    (n > 0).then(|| ratio(hit, n))
}

/// Per-domain micro-F1, overall micro-F1 and both macro variants.
///
/// For single-label multiclass data pooled F1 equals accuracy, which is how
/// the micro scores are computed.
pub fn f1_scores(pairs: &[ScoredPair]) -> Result<F1Report, EvaluationError> {
    if pairs.is_empty() {
        return Err(EvaluationError::EmptyRun);
    }
    let mut n_per_domain = [0; 5];
    let mut domain_micro = [None; 5];
    for d in 1..=5u8 {
        let idx = d as usize - 1;
        let in_domain: Vec<&ScoredPair> = pairs.iter().filter(|p| p.qid.domain() == d).collect();
        n_per_domain[idx] = in_domain.len();
        domain_micro[idx] = accuracy(in_domain);
    }
    let micro = accuracy(pairs).expect("non-empty");

    let mut per_class = BTreeMap::new();
    for c in Class3::ALL {
        let tp = pairs.iter().filter(|p| p.gold == c && p.pred == c).count();
        let fp = pairs.iter().filter(|p| p.gold != c && p.pred == c).count();
        let fn_ = pairs.iter().filter(|p| p.gold == c && p.pred != c).count();
        if tp + fp + fn_ == 0 {
            continue;
        }
        per_class.insert(
            c,
            ClassScore {
                tp,
                fp,
                fn_,
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fn_),
                f1: ratio(2 * tp, 2 * tp + fp + fn_),
            },
        );
    }
    let macro_per_class = per_class.values().map(|s| s.f1).sum::<f64>() / per_class.len() as f64;

    let mut by_question: BTreeMap<Qid, Vec<&ScoredPair>> = BTreeMap::new();
    for p in pairs {
        by_question.entry(p.qid).or_default().push(p);
    }
    let macro_per_question = by_question
        .values()
        .map(|v| accuracy(v.iter().copied()).expect("non-empty group"))
        .sum::<f64>()
        / by_question.len() as f64;

    Ok(F1Report { n: pairs.len(), n_per_domain, domain_micro, micro, macro_per_class, macro_per_question, per_class })
}

/// How bad a misclassification is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSeverity {
    /// One side of the error is NI.
    Class1,
    /// Y/PY and N/PN swapped.
    Class2,
}

/// `None` when the prediction is correct.
pub fn severity(gold: Class3, pred: Class3) -> Option<ErrorSeverity> {
    if gold == pred {
        None
    } else if gold == Class3::Ni || pred == Class3::Ni {
        Some(ErrorSeverity::Class1)
    } else {
        Some(ErrorSeverity::Class2)
    }
}

/// Confusion counts for one class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityRow {
    pub tp: usize,
    pub fp_class1: usize,
    pub fp_class2: usize,
    pub fn_class1: usize,
    pub fn_class2: usize,
    /// False positives keyed by the gold class.
    pub fp_by_gold: BTreeMap<Class3, usize>,
    /// False negatives keyed by the predicted class.
    pub fn_by_pred: BTreeMap<Class3, usize>,
}

/// Column assignment for the two error columns of each class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityLayout {
    /// Columns hold Class1 and Class2 errors. Every NI error is Class1.
    #[default]
    BySeverity,
    /// Columns hold the two alternative classes: for Y/PY and N/PN the NI
    /// alternative first, for NI the N/PN alternative first.
    ByAlternative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityTable {
    pub rows: BTreeMap<Class3, SeverityRow>,
}

impl SeverityTable {
    /// `[TP, FP col 1, FP col 2, FN col 1, FN col 2]`.
    pub fn values(&self, class: Class3, layout: SeverityLayout) -> [usize; 5] {
        let r = &self.rows[&class];
        match layout {
            SeverityLayout::BySeverity => [r.tp, r.fp_class1, r.fp_class2, r.fn_class1, r.fn_class2],
            SeverityLayout::ByAlternative => {
                let alts = match class {
                    Class3::Ni => [Class3::Npn, Class3::Ypy],
                    Class3::Npn => [Class3::Ni, Class3::Ypy],
                    Class3::Ypy => [Class3::Ni, Class3::Npn],
                };
                let fp = |c| r.fp_by_gold.get(&c).copied().unwrap_or(0);
                let fn_ = |c| r.fn_by_pred.get(&c).copied().unwrap_or(0);
                [r.tp, fp(alts[0]), fp(alts[1]), fn_(alts[0]), fn_(alts[1])]
            }
        }
    }
}

/// TP and severity-split FP/FN counts for each class.
pub fn severity_breakdown(pairs: &[ScoredPair]) -> SeverityTable {
    let mut rows: BTreeMap<Class3, SeverityRow> = Class3::ALL.iter().map(|c| (*c, SeverityRow::default())).collect();
    for p in pairs {
        match severity(p.gold, p.pred) {
            None => rows.get_mut(&p.gold).expect("all classes").tp += 1,
            Some(s) => {
                let fp_row = rows.get_mut(&p.pred).expect("all classes");
                match s {
                    ErrorSeverity::Class1 => fp_row.fp_class1 += 1,
                    ErrorSeverity::Class2 => fp_row.fp_class2 += 1,
                }
                *fp_row.fp_by_gold.entry(p.gold).or_default() += 1;
                let fn_row = rows.get_mut(&p.gold).expect("all classes");
                match s {
                    ErrorSeverity::Class1 => fn_row.fn_class1 += 1,
                    ErrorSeverity::Class2 => fn_row.fn_class2 += 1,
                }
                *fn_row.fn_by_pred.entry(p.pred).or_default() += 1;
            }
        }
    }
    SeverityTable { rows }
}

/// Cell-wise mean over several runs, in the given layout.
pub fn average_severity(tables: &[SeverityTable], layout: SeverityLayout) -> BTreeMap<Class3, [f64; 5]> {
    let mut out = BTreeMap::new();
    for c in Class3::ALL {
        let mut acc = [0.0; 5];
        for t in tables {
            for (a, v) in acc.iter_mut().zip(t.values(c, layout)) {
                *a += v as f64;
            }
        }
        if !tables.is_empty() {
            acc.iter_mut().for_each(|a| *a /= tables.len() as f64);
        }
        out.insert(c, acc);
    }
    out
}

/// Cohen's kappa with chance agreement from the product of the two raters'
/// marginals.
pub fn cohens_kappa<T: Ord + Copy>(a: &[T], b: &[T]) -> Result<f64, EvaluationError> {
    if a.len() != b.len() {
        return Err(EvaluationError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvaluationError::NoItems);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut ma: BTreeMap<T, usize> = BTreeMap::new();
    let mut mb: BTreeMap<T, usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *ma.entry(*x).or_default() += 1;
        *mb.entry(*y).or_default() += 1;
    }
    let expected: f64 = ma.iter().map(|(k, ca)| (*ca as f64 / n) * (mb.get(k).copied().unwrap_or(0) as f64 / n)).sum();
    if (1.0 - expected).abs() < f64::EPSILON {
        // Both raters used one and the same label throughout.
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}

pub fn cohens_kappa_4class(a: &[Class4], b: &[Class4]) -> Result<f64, EvaluationError> {
    cohens_kappa(a, b)
}
