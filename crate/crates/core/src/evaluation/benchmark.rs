use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{f1_scores, ScoredPair};
use super::{Class3, EvaluationError, F1Report};
use crate::clock::Clock;
use crate::dataset::{Dataset, DatasetRecord};
use crate::document::{DocId, TrialDocument};
use crate::qa::{Assessor, ContextMode, FewShotExample};
use crate::questionnaire::{Answer, Qid, Questionnaire};
use crate::retrieval::{
    Bm25Params, EmbedError, Embedder, ParagraphIndex, RankedQuestion, RetrievalError, RetrieverKind, SidecarVectors,
};

/// What a benchmark run needs besides the dataset.
pub struct BenchmarkSettings<'a> {
    pub assessor: &'a Assessor<'a>,
    /// Used to index documents without reference vectors.
    pub embedder: &'a dyn Embedder,
    pub vectors: Option<&'a SidecarVectors>,
    pub clock: &'a dyn Clock,
    /// Upper bound on documents processed at once.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub doc_id: DocId,
    pub qid: Qid,
    pub gold: Answer,
    pub pred: Answer,
    pub raw_response_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub doc_id: DocId,
    pub qid: Qid,
    pub error: String,
}

/// Everything that varies between otherwise identical runs lives here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub model_id: String,
    pub context_mode: ContextMode,
    pub retriever: RetrieverKind,
    pub fewshot: bool,
    /// SHA-256 of the serialized assessment configuration.
    pub config_digest: String,
    pub items: Vec<BenchmarkItem>,
    pub failures: Vec<ItemFailure>,
    /// Few-shot examples withheld from scoring.
    pub excluded: Vec<(DocId, Qid)>,
    pub metadata: RunMetadata,
}

/// One line of the raw run cache.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCacheLine {
    pub doc_id: DocId,
    pub qid: Qid,
    pub gold: Class3,
    pub pred: Class3,
    pub raw_response_digest: String,
}

/// A results-table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub model: String,
    pub retrieval: String,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub d3: Option<f64>,
    pub d4: Option<f64>,
    pub d5: Option<f64>,
    pub micro: f64,
    pub macro_per_class: f64,
    pub macro_per_question: f64,
    pub n_d1: usize,
    pub n_d2: usize,
    pub n_d3: usize,
    pub n_d4: usize,
    pub n_d5: usize,
    pub coverage: f64,
}

impl BenchmarkRun {
    /// Items with both sides in the three scored classes.
    pub fn pairs(&self) -> Vec<ScoredPair> {
        self.items
            .iter()
            .filter_map(|i| {
                Some(ScoredPair { qid: i.qid, gold: Class3::from_answer(i.gold)?, pred: Class3::from_answer(i.pred)? })
            })
            .collect()
    }

    pub fn scores(&self) -> Result<F1Report, EvaluationError> {
        f1_scores(&self.pairs())
    }

    /// Share of attempted questions that produced a prediction.
    pub fn coverage(&self) -> f64 {
        let total = self.items.len() + self.failures.len();
        if total == 0 {
            0.0
        } else {
            self.items.len() as f64 / total as f64
        }
    }

    pub fn cache_lines(&self) -> Vec<RunCacheLine> {
        self.items
            .iter()
            .filter_map(|i| {
                Some(RunCacheLine {
                    doc_id: i.doc_id.clone(),
                    qid: i.qid,
                    gold: Class3::from_answer(i.gold)?,
                    pred: Class3::from_answer(i.pred)?,
                    raw_response_digest: i.raw_response_digest.clone(),
                })
            })
            .collect()
    }

    pub fn retrieval_label(&self) -> String {
        match self.context_mode {
            ContextMode::Oracle => "Oracle".into(),
            ContextMode::TopK(k) => format!("k={k}"),
            ContextMode::FullPaper => "Full".into(),
        }
    }

    pub fn table2_row(&self) -> Result<Table2Row, EvaluationError> {
        let s = self.scores()?;
        let model = if self.fewshot { format!("{} (FS)", self.model_id) } else { self.model_id.clone() };
        Ok(Table2Row {
            model,
            retrieval: self.retrieval_label(),
            d1: s.domain_micro[0],
            d2: s.domain_micro[1],
            d3: s.domain_micro[2],
            d4: s.domain_micro[3],
            d5: s.domain_micro[4],
            micro: s.micro,
            macro_per_class: s.macro_per_class,
            macro_per_question: s.macro_per_question,
            n_d1: s.n_per_domain[0],
            n_d2: s.n_per_domain[1],
            n_d3: s.n_per_domain[2],
            n_d4: s.n_per_domain[3],
            n_d5: s.n_per_domain[4],
            coverage: self.coverage(),
        })
    }
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Index over reference vectors when the sidecar covers the document, else
/// over freshly computed embeddings.
pub(crate) fn index_for(
    doc: &TrialDocument,
    embedder: &dyn Embedder,
    vectors: Option<&SidecarVectors>,
) -> Result<ParagraphIndex, RetrievalError> {
    match vectors {
        Some(v) if !v.document(&doc.doc_id).is_empty() => ParagraphIndex::from_sidecar(doc, v, Bm25Params::default()),
        _ => ParagraphIndex::build(doc, embedder, Bm25Params::default()),
    }
}

/// Gold-labelled questions scored in a run: every question of the manual
/// subset with a non-`NotApplicable` answer, restricted to questions with
/// annotator evidence in oracle mode.
pub fn gold_questions(record: &DatasetRecord, mode: ContextMode) -> Vec<(Qid, Answer)> {
    record
        .questions
        .iter()
        .filter_map(|(q, a)| {
            let gold = a.answer.filter(|g| g.is_response())?;
            let has_evidence = a.evidence.as_deref().is_some_and(|e| !e.trim().is_empty());
            (mode != ContextMode::Oracle || has_evidence).then_some((*q, gold))
        })
        .collect()
}

/// Asks every gold-labelled question of the manual subset. Each question is
/// asked on its own, so the set of scored questions does not depend on the
/// model's answers to gate questions.
pub fn run_benchmark(dataset: &Dataset, settings: &BenchmarkSettings<'_>) -> BenchmarkRun {
    let started_at = settings.clock.now();
    let config = settings.assessor.config();
    let excluded: BTreeSet<(DocId, Qid)> = config.fewshot.as_ref().map(|f| f.keys()).unwrap_or_default();
    let records: Vec<&DatasetRecord> = dataset.manual().collect();

    let per_doc = |record: &&DatasetRecord| -> (Vec<BenchmarkItem>, Vec<ItemFailure>) {
        let mut items = Vec::new();
        let mut failures = Vec::new();
        let golds: Vec<(Qid, Answer)> = gold_questions(record, config.mode)
            .into_iter()
            .filter(|(q, _)| !excluded.contains(&(record.doc_id.clone(), *q)))
            .collect();
        let fail_all = |failures: &mut Vec<ItemFailure>, error: String| {
            failures.extend(golds.iter().map(|(q, _)| ItemFailure { doc_id: record.doc_id.clone(), qid: *q, error: error.clone() }));
        };
        let Some(doc) = dataset.documents.get(&record.doc_id) else {
            fail_all(&mut failures, "document missing from dataset".into());
            return (items, failures);
        };
        let index = match index_for(doc, settings.embedder, settings.vectors) {
            Ok(i) => i,
            Err(e) => {
                fail_all(&mut failures, e.to_string());
                return (items, failures);
            }
        };
        let oracle = record.oracle_evidence(doc);
        for (qid, gold) in &golds {
            match settings.assessor.answer_question(doc, &index, *qid, oracle.get(qid)) {
                Ok(a) => items.push(BenchmarkItem {
                    doc_id: record.doc_id.clone(),
                    qid: *qid,
                    gold: *gold,
                    pred: a.answer,
                    raw_response_digest: digest(&a.raw_response),
                }),
                Err(e) => failures.push(ItemFailure { doc_id: record.doc_id.clone(), qid: *qid, error: e.to_string() }),
            }
        }
        (items, failures)
    };

    let results: Vec<(Vec<BenchmarkItem>, Vec<ItemFailure>)> = match rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| records.par_iter().map(per_doc).collect()),
        Err(_) => records.iter().map(per_doc).collect(),
    };
    let (mut items, mut failures) = (Vec::new(), Vec::new());
    for (i, f) in results {
        items.extend(i);
        failures.extend(f);
    }
    let config_json = serde_json::to_string(config).expect("config serializes");
    BenchmarkRun {
        model_id: settings.assessor.model_id().to_owned(),
        context_mode: config.mode,
        retriever: config.retriever,
        fewshot: config.fewshot.is_some(),
        config_digest: digest(&config_json),
        items,
        failures,
        excluded: excluded.into_iter().collect(),
        metadata: RunMetadata { started_at, finished_at: settings.clock.now() },
    }
}

/// Candidate few-shot examples: manual-subset questions with a response
/// answer and annotator evidence.
pub fn fewshot_pool(dataset: &Dataset, questionnaire: &Questionnaire) -> Vec<FewShotExample> {
    let mut pool = Vec::new();
    for r in dataset.manual() {
        for (qid, q) in &r.questions {
            let (Some(answer), Some(passage), Some(sq)) = (q.answer, q.evidence.as_deref(), questionnaire.get(*qid)) else {
                continue;
            };
            if answer.is_response() && !passage.trim().is_empty() {
                pool.push(FewShotExample {
                    doc_id: r.doc_id.clone(),
                    qid: *qid,
                    question: sq.text.clone(),
                    passage: passage.trim().to_owned(),
                    answer,
                });
            }
        }
    }
    pool
}

/// Full paragraph rankings for every question with annotator evidence, for
/// recall@k. Questions whose passage cannot be aligned keep `gold: None` and
/// are left out of recall.
pub fn rank_evidence(
    dataset: &Dataset,
    questionnaire: &Questionnaire,
    retriever: RetrieverKind,
    embedder: Option<&dyn Embedder>,
) -> Result<Vec<RankedQuestion>, RetrievalError> {
    let mut out = Vec::new();
    let fallback = crate::retrieval::HashEmbedder;
    for r in &dataset.records {
        let Some(doc) = dataset.documents.get(&r.doc_id) else { continue };
        let oracle = r.oracle_evidence(doc);
        if oracle.is_empty() {
            continue;
        }
        let index = index_for(doc, embedder.unwrap_or(&fallback), dataset.vectors.as_ref())?;
        let n = index.len().max(1);
        for (qid, ev) in &oracle {
            let Some(q) = questionnaire.get(*qid) else { continue };
            let hits = match retriever {
                RetrieverKind::Bm25 => index.query_bm25(&q.text, n)?,
                RetrieverKind::Embedding => {
                    let sidecar_query = dataset.vectors.as_ref().filter(|v| v.model_id == index.model_id).and_then(|v| v.query(*qid));
                    match (sidecar_query, embedder) {
                        (Some(v), _) => index.query_embedding(v, n)?,
                        (None, Some(e)) => index.query_vector(&q.text, n, e)?,
                        (None, None) => {
                            return Err(RetrievalError::Query(EmbedError::Missing(format!("query vector for {qid}"))))
                        }
                    }
                }
            };
            out.push(RankedQuestion { ranking: hits.into_iter().map(|h| h.paragraph_index).collect(), gold: ev.paragraph_index });
        }
    }
    Ok(out)
}

/// Question counts per domain (gold-labelled, and with evidence), as in the
/// header rows of the results table.
pub fn question_counts(dataset: &Dataset) -> BTreeMap<&'static str, [usize; 5]> {
    let mut total = [0; 5];
    let mut oracle = [0; 5];
    for r in dataset.manual() {
        for (q, _) in gold_questions(r, ContextMode::FullPaper) {
            total[q.domain() as usize - 1] += 1;
        }
        for (q, _) in gold_questions(r, ContextMode::Oracle) {
            oracle[q.domain() as usize - 1] += 1;
        }
    }
    BTreeMap::from([("n_oracle", oracle), ("n_total", total)])
}
