use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::DateTime;
use rob2_core::clock::{Clock, FixedClock, SystemClock};
use rob2_core::dataset::{Dataset, DatasetError};
use rob2_core::document::{ingest_document, DocId, TrialDocument};
use rob2_core::evaluation::{
    average_severity, cohens_kappa_4class, fewshot_pool, rank_evidence, run_benchmark, severity_breakdown,
    BenchmarkRun, BenchmarkSettings, Class3, RunMetadata, SeverityLayout, Table2Row,
};
use rob2_core::qa::{AssessConfig, Assessor, ContextMode, FewShotSet, QuestionOutcome, ResponseCache};
use rob2_core::questionnaire::Questionnaire;
use rob2_core::retrieval::{recall_at_k, Bm25Params, ParagraphIndex, RetrieverKind};
use rob2_core::rob_logic::{RiskLevel, RuleSet};
use rob2_core::store::{export_session, usage_stats, MemoryStore, NewSession, Provenance, UsageCounts, Workbench};
use serde::Serialize;
use serde_json::Value;

use crate::args::{AssessArgs, QaArgs};
use crate::config::CliConfig;
use crate::error::CliError;
use crate::output::{Metadata, Output};

pub struct Ctx<'a> {
    pub cfg: CliConfig,
    pub out: Output,
    pub stdout: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn say(&mut self, line: impl AsRef<str>) -> Result<(), CliError> {
        writeln!(self.stdout, "{}", line.as_ref()).map_err(|e| CliError::io("<stdout>", e))
    }

    fn dataset(&self) -> Result<Dataset, CliError> {
        Ok(Dataset::load(&self.cfg.dataset)?)
    }

    fn finish(&self, stem: &str, command: &str, started_at: DateTime<chrono::Utc>) -> Result<(), CliError> {
        let meta = Metadata {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION"),
            started_at,
            finished_at: SystemClock.now(),
            config_file: self.cfg.config_file.clone(),
        };
        self.out.metadata(stem, &meta).map(|_| ())
    }
}

fn clock(fixed: bool) -> Arc<dyn Clock> {
    if fixed {
        Arc::new(FixedClock::epoch())
    } else {
        Arc::new(SystemClock)
    }
}

fn domain_label(d: usize) -> String {
    format!("D{d}")
}

fn level(r: Option<RiskLevel>) -> &'static str {
    r.map_or("-", RiskLevel::as_str)
}

#[derive(Debug, Serialize)]
struct IngestRow {
    file: String,
    doc_id: String,
    paragraphs: usize,
    status: &'static str,
}

pub fn ingest(ctx: &mut Ctx<'_>, files: &[PathBuf]) -> Result<(), CliError> {
    let started = SystemClock.now();
    let dir = ctx.cfg.data_dir()?.join("documents");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut rows = Vec::new();
    for file in files {
        let bytes = fs::read(file).map_err(|e| CliError::io(file, e))?;
        let doc = ingest_document(&bytes).map_err(|source| CliError::Document { path: file.clone(), source })?;
        let target = dir.join(format!("{}.json", doc.doc_id));
        let json = doc.to_json();
        let status = match fs::read_to_string(&target) {
            Ok(existing) if existing == json => "unchanged",
            Ok(_) => "updated",
            Err(_) => "added",
        };
        if status != "unchanged" {
            fs::write(&target, &json).map_err(|e| CliError::io(&target, e))?;
        }
        rows.push(IngestRow {
            file: file.display().to_string(),
            doc_id: doc.doc_id.to_string(),
            paragraphs: doc.len(),
            status,
        });
    }
    ctx.out.json("ingest.json", &rows)?;
    ctx.out.csv("ingest.csv", &rows)?;
    for r in &rows {
        ctx.say(format!("{:<10} {} ({} paragraphs)", r.status, r.doc_id, r.paragraphs))?;
    }
    ctx.finish("ingest", "ingest", started)
}

/// The document from the data directory, else from the dataset.
fn find_document(ctx: &Ctx<'_>, id: &DocId, dataset: Option<&Dataset>) -> Result<TrialDocument, CliError> {
    if let Some(dir) = &ctx.cfg.settings.data_dir {
        let path = dir.join("documents").join(format!("{id}.json"));
        if let Ok(bytes) = fs::read(&path) {
            return ingest_document(&bytes).map_err(|source| CliError::Document { path, source });
        }
    }
    dataset
        .and_then(|ds| ds.documents.get(id).cloned())
        .ok_or_else(|| CliError::UnknownDocument(id.to_string()))
}

#[derive(Debug, Serialize)]
struct AssessSummary {
    session_id: String,
    doc_id: String,
    model_id: String,
    context_mode: ContextMode,
    status: String,
    answered: usize,
    pending: Vec<String>,
    domain_judgments: [Option<RiskLevel>; 5],
    overall: Option<RiskLevel>,
}

pub fn assess(ctx: &mut Ctx<'_>, args: &AssessArgs) -> Result<(), CliError> {
    let started = SystemClock.now();
    let id = DocId::new(args.doc.clone());
    let ingested = ctx
        .cfg
        .settings
        .data_dir
        .as_ref()
        .is_some_and(|d| d.join("documents").join(format!("{id}.json")).is_file());
    let dataset = if ingested && args.mode != ContextMode::Oracle {
        None
    } else {
        match ctx.dataset() {
            Ok(ds) => Some(ds),
            Err(CliError::Dataset(DatasetError::Missing { .. })) if args.mode != ContextMode::Oracle => {
                return Err(CliError::UnknownDocument(id.to_string()))
            }
            Err(e) => return Err(e),
        }
    };
    let doc = find_document(ctx, &id, dataset.as_ref())?;
    let oracle = dataset
        .as_ref()
        .and_then(|ds| ds.manual().find(|r| r.doc_id == id))
        .map(|r| r.oracle_evidence(&doc))
        .unwrap_or_default();

    let questionnaire = Arc::new(Questionnaire::bundled());
    let llm = ctx.cfg.settings.llm_client(args.model.as_deref())?;
    let embedder = ctx.cfg.settings.embedder();
    let index = ParagraphIndex::build(&doc, embedder.as_ref(), Bm25Params::default())?;
    let mut config = AssessConfig::new(args.mode);
    config.retriever = args.retriever;
    let assessor = Assessor::new(&questionnaire, llm.as_ref(), config).with_embedder(embedder.as_ref());
    let outcome = assessor.assess_document(&doc, &index, &oracle);
    if outcome.model_answers().next().is_none() {
        if let Some(QuestionOutcome::Failed { error }) =
            outcome.questions.values().find(|o| matches!(o, QuestionOutcome::Failed { .. }))
        {
            return Err(CliError::AllFailed(error.clone()));
        }
    }

    let wb = Workbench::with_clock(
        questionnaire.clone(),
        Arc::new(RuleSet::bundled()),
        Box::new(MemoryStore::default()),
        clock(args.fixed_clock),
    );
    let session = wb.create_session(NewSession {
        doc_id: id.clone(),
        annotator_id: args.annotator.clone(),
        provenance: Provenance::Assisted,
        model_id: Some(llm.model_id().to_owned()),
        context_mode: Some(args.mode),
        paragraph_count: doc.len(),
    })?;
    for a in outcome.model_answers() {
        wb.record_model_answer(&session.session_id, a.clone())?;
    }
    let pending = outcome.pending();
    let session = if pending.is_empty() { wb.complete(&session.session_id)? } else { wb.get(&session.session_id)? };

    let stem = format!("session-{id}");
    ctx.out.text(&format!("{stem}.json"), &export_session(&session))?;
    ctx.out.json(&format!("outcome-{id}.json"), &outcome)?;
    let summary = AssessSummary {
        session_id: session.session_id.clone(),
        doc_id: id.to_string(),
        model_id: llm.model_id().to_owned(),
        context_mode: args.mode,
        status: serde_json::to_value(session.status).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
        answered: outcome.model_answers().count(),
        pending: pending.iter().map(|q| q.to_string()).collect(),
        domain_judgments: session.domain_judgments,
        overall: session.overall,
    };
    ctx.out.json(&format!("summary-{id}.json"), &summary)?;

    ctx.say(format!("{} {} ({}, {})", summary.session_id, summary.doc_id, summary.model_id, summary.context_mode))?;
    ctx.say(format!("status {}: {} answered, {} pending", summary.status, summary.answered, pending.len()))?;
    let domains: Vec<String> =
        session.domain_judgments.iter().enumerate().map(|(d, j)| format!("{}={}", domain_label(d + 1), level(*j))).collect();
    ctx.say(format!("{} overall={}", domains.join(" "), level(session.overall)))?;
    ctx.say(format!("wrote {}", ctx.out.path(&format!("{stem}.json")).display()))?;
    ctx.finish(&stem, "assess", started)
}

#[derive(Debug, Serialize)]
struct RecallAt {
    k: usize,
    recall: f64,
}

#[derive(Debug, Serialize)]
struct RetrievalRow {
    retriever: RetrieverKind,
    /// Questions whose evidence aligned to a paragraph.
    questions: usize,
    unaligned: usize,
    recall: Vec<RecallAt>,
}

#[derive(Debug, Serialize)]
struct RetrievalCsvRow<'a> {
    retriever: &'a str,
    k: usize,
    recall: f64,
    questions: usize,
}

fn retriever_name(k: RetrieverKind) -> &'static str {
    match k {
        RetrieverKind::Embedding => "embedding",
        RetrieverKind::Bm25 => "bm25",
    }
}

pub fn eval_retrieval(ctx: &mut Ctx<'_>, ks: &[usize], only: Option<RetrieverKind>) -> Result<(), CliError> {
    let started = SystemClock.now();
    if ks.is_empty() || ks.contains(&0) {
        return Err(CliError::Config("--k needs positive cutoffs such as 1,3,5,10".into()));
    }
    let ds = ctx.dataset()?;
    let qn = Questionnaire::bundled();
    let embedder = ctx.cfg.settings.embedder();
    let kinds = only.map_or_else(|| vec![RetrieverKind::Embedding, RetrieverKind::Bm25], |k| vec![k]);
    let mut rows = Vec::new();
    for kind in kinds {
        let ranked = rank_evidence(&ds, &qn, kind, Some(embedder.as_ref()))?;
        let questions = ranked.iter().filter(|r| r.gold.is_some()).count();
        let recall = ks
            .iter()
            .map(|&k| Ok(RecallAt { k, recall: recall_at_k(&ranked, k)? }))
            .collect::<Result<Vec<_>, CliError>>()?;
        rows.push(RetrievalRow { retriever: kind, questions, unaligned: ranked.len() - questions, recall });
    }
    #[derive(Serialize)]
    struct Report<'a> {
        vectors_model: Option<&'a str>,
        rows: &'a [RetrievalRow],
    }
    let report = Report { vectors_model: ds.vectors.as_ref().map(|v| v.model_id.as_str()), rows: &rows };
    ctx.out.json("retrieval.json", &report)?;
    let csv_rows = rows.iter().flat_map(|r| {
        r.recall.iter().map(|x| RetrievalCsvRow {
            retriever: retriever_name(r.retriever),
            k: x.k,
            recall: x.recall,
            questions: r.questions,
        })
    });
    ctx.out.csv("retrieval.csv", csv_rows)?;

    let header: Vec<String> = ks.iter().map(|k| format!("{:>7}", format!("R@{k}"))).collect();
    ctx.say(format!("{:<10} {} {:>9}", "retriever", header.join(""), "questions"))?;
    for r in &rows {
        let vals: Vec<String> = r.recall.iter().map(|x| format!("{:>7.3}", x.recall)).collect();
        ctx.say(format!("{:<10} {} {:>9}", retriever_name(r.retriever), vals.join(""), r.questions))?;
    }
    ctx.finish("retrieval", "eval retrieval", started)
}

/// File stem for a run: model, context mode and few-shot flag.
pub fn run_stem(run: &BenchmarkRun) -> String {
    let raw = format!("{}_{}{}", run.model_id, run.context_mode, if run.fewshot { "_fs" } else { "" });
    raw.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_') { c } else { '_' }).collect()
}

/// Timestamps go to `runs/<stem>.meta.json` through the run's own metadata.
pub fn eval_qa(ctx: &mut Ctx<'_>, args: &QaArgs) -> Result<(), CliError> {
    let ds = ctx.dataset()?;
    let qn = Questionnaire::bundled();
    let llm = ctx.cfg.settings.llm_client(args.model.as_deref())?;
    let embedder = ctx.cfg.settings.embedder();
    let jobs = args.jobs.unwrap_or(ctx.cfg.jobs);
    let seed = args.seed.unwrap_or(ctx.cfg.seed);

    let mut config = AssessConfig::new(args.mode);
    config.retriever = args.retriever;
    if args.fewshot {
        config.fewshot = Some(FewShotSet::sample(&fewshot_pool(&ds, &qn), seed));
    }
    let cache = match &args.cache {
        Some(p) => Some(ResponseCache::open(p).map_err(|e| CliError::io(p, e))?),
        None => None,
    };
    let mut assessor = Assessor::new(&qn, llm.as_ref(), config).with_embedder(embedder.as_ref());
    if let Some(v) = &ds.vectors {
        assessor = assessor.with_sidecar(v);
    }
    if let Some(c) = &cache {
        assessor = assessor.with_cache(c);
    }
    let clock = clock(args.fixed_clock);
    let settings = BenchmarkSettings {
        assessor: &assessor,
        embedder: embedder.as_ref(),
        vectors: ds.vectors.as_ref(),
        clock: clock.as_ref(),
        jobs,
    };
    let run = run_benchmark(&ds, &settings);
    if run.items.is_empty() {
        if let Some(f) = run.failures.first() {
            return Err(CliError::AllFailed(format!("{} {}: {}", f.doc_id, f.qid, f.error)));
        }
    }
    let stem = run_stem(&run);
    save_run(&ctx.out, &stem, &run)?;
    let row = run.table2_row()?;
    ctx.say(format!("{} items, {} failures, {} withheld for few-shot", run.items.len(), run.failures.len(), run.excluded.len()))?;
    print_table2(ctx, std::slice::from_ref(&row))?;
    ctx.say(format!("wrote {}", ctx.out.path(&format!("runs/{stem}.json")).display()))
}

/// Writes the run without its timestamps, the timestamps beside it, and one
/// cache line per scored item.
pub fn save_run(out: &Output, stem: &str, run: &BenchmarkRun) -> Result<(), CliError> {
    let mut value = serde_json::to_value(run).map_err(|e| CliError::io(out.path(stem), e))?;
    let meta = value.as_object_mut().and_then(|o| o.remove("metadata")).unwrap_or(Value::Null);
    out.json(&format!("runs/{stem}.json"), &value)?;
    out.json(&format!("runs/{stem}.meta.json"), &meta)?;
    let mut lines = String::new();
    for l in run.cache_lines() {
        lines.push_str(&serde_json::to_string(&l).expect("cache line serializes"));
        lines.push('\n');
    }
    out.text(&format!("runs/{stem}.cache.jsonl"), &lines)?;
    Ok(())
}

/// Every run stored in `dir`, ordered by file name.
pub fn load_runs(dir: &Path) -> Result<Vec<BenchmarkRun>, CliError> {
    let entries = fs::read_dir(dir).map_err(|_| CliError::NoRuns(dir.to_owned()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".json") && !name.ends_with(".meta.json")
        })
        .collect();
    paths.sort();
    let mut runs = Vec::new();
    for path in paths {
        let read = |p: &Path| -> Result<Value, CliError> {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::io(p, e))
        };
        let mut value = read(&path)?;
        let meta_path = path.with_extension("meta.json");
        let meta = if meta_path.is_file() {
            read(&meta_path)?
        } else {
            let epoch = DateTime::UNIX_EPOCH;
            serde_json::to_value(RunMetadata { started_at: epoch, finished_at: epoch }).expect("metadata serializes")
        };
        if let Some(o) = value.as_object_mut() {
            o.insert("metadata".into(), meta);
        }
        runs.push(serde_json::from_value(value).map_err(|e| CliError::io(&path, e))?);
    }
    if runs.is_empty() {
        return Err(CliError::NoRuns(dir.to_owned()));
    }
    Ok(runs)
}

fn fmt_f1(v: Option<f64>) -> String {
    v.map_or_else(|| format!("{:>6}", "-"), |x| format!("{x:>6.3}"))
}

fn print_table2(ctx: &mut Ctx<'_>, rows: &[Table2Row]) -> Result<(), CliError> {
    ctx.say(format!(
        "{:<24} {:<7} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "model", "context", "D1", "D2", "D3", "D4", "D5", "micro", "mac-c", "mac-q"
    ))?;
    for r in rows {
        ctx.say(format!(
            "{:<24} {:<7} {} {} {} {} {} {:>6.3} {:>6.3} {:>6.3}",
            r.model,
            r.retrieval,
            fmt_f1(r.d1),
            fmt_f1(r.d2),
            fmt_f1(r.d3),
            fmt_f1(r.d4),
            fmt_f1(r.d5),
            r.micro,
            r.macro_per_class,
            r.macro_per_question
        ))?;
    }
    Ok(())
}

fn runs_dir(ctx: &Ctx<'_>, runs: Option<&Path>) -> PathBuf {
    runs.map_or_else(|| ctx.out.path("runs"), Path::to_path_buf)
}

pub fn report_table2(ctx: &mut Ctx<'_>, runs: Option<&Path>) -> Result<(), CliError> {
    let started = SystemClock.now();
    let runs = load_runs(&runs_dir(ctx, runs))?;
    let rows = runs.iter().map(BenchmarkRun::table2_row).collect::<Result<Vec<_>, _>>()?;
    ctx.out.json("table2.json", &rows)?;
    ctx.out.csv("table2.csv", &rows)?;
    print_table2(ctx, &rows)?;
    ctx.finish("table2", "report table2", started)
}

pub fn report_severity(ctx: &mut Ctx<'_>, runs: Option<&Path>, layout: SeverityLayout) -> Result<(), CliError> {
    let started = SystemClock.now();
    let runs = load_runs(&runs_dir(ctx, runs))?;
    let tables: Vec<_> = runs.iter().map(|r| severity_breakdown(&r.pairs())).collect();
    let avg = average_severity(&tables, layout);
    let columns: [&str; 6] = match layout {
        SeverityLayout::BySeverity => ["class", "tp", "fp_class1", "fp_class2", "fn_class1", "fn_class2"],
        SeverityLayout::ByAlternative => ["class", "tp", "fp_alt1", "fp_alt2", "fn_alt1", "fn_alt2"],
    };
    let rows: Vec<Vec<String>> = Class3::ALL
        .iter()
        .map(|c| std::iter::once(c.as_str().to_owned()).chain(avg[c].iter().map(|v| v.to_string())).collect())
        .collect();
    #[derive(Serialize)]
    struct Report<'a> {
        layout: SeverityLayout,
        runs: usize,
        columns: [&'a str; 6],
        rows: &'a BTreeMap<Class3, [f64; 5]>,
    }
    ctx.out.json("severity.json", &Report { layout, runs: runs.len(), columns, rows: &avg })?;
    ctx.out.csv_table("severity.csv", &columns, &rows)?;
    ctx.say(format!("averaged over {} runs", runs.len()))?;
    ctx.say(columns.iter().map(|c| format!("{c:>10}")).collect::<String>())?;
    for c in Class3::ALL {
        let vals: String = avg[&c].iter().map(|v| format!("{v:>10.1}")).collect();
        ctx.say(format!("{:>10}{vals}", c.as_str()))?;
    }
    ctx.finish("severity", "report severity", started)
}

#[derive(Debug, Serialize)]
struct UsageRow {
    domain: String,
    model_answers: usize,
    model_answer_pct: f64,
    expert_answers: usize,
    expert_answer_pct: f64,
    model_rationales: usize,
    model_rationale_pct: f64,
    expert_rationales: usize,
    expert_rationale_pct: f64,
    upvote_questions: usize,
    downvote_questions: usize,
    added_paragraph_questions: usize,
    upvotes: usize,
    downvotes: usize,
    added_paragraphs: usize,
    positive_feedback_pct: f64,
}

impl UsageRow {
    fn new(domain: String, c: &UsageCounts) -> Self {
        UsageRow {
            domain,
            model_answers: c.model_answers,
            model_answer_pct: c.model_answer_pct(),
            expert_answers: c.expert_answers,
            expert_answer_pct: c.expert_answer_pct(),
            model_rationales: c.model_rationales,
            model_rationale_pct: c.model_rationale_pct(),
            expert_rationales: c.expert_rationales,
            expert_rationale_pct: c.expert_rationale_pct(),
            upvote_questions: c.upvote_questions,
            downvote_questions: c.downvote_questions,
            added_paragraph_questions: c.added_paragraph_questions,
            upvotes: c.upvotes,
            downvotes: c.downvotes,
            added_paragraphs: c.added_paragraphs,
            positive_feedback_pct: c.positive_feedback_pct(),
        }
    }
}

pub fn report_usage(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let started = SystemClock.now();
    let ds = ctx.dataset()?;
    let sessions: Vec<_> = ds
        .assisted()
        .map(|r| r.to_session(ds.documents.get(&r.doc_id).map_or(0, TrialDocument::len), DateTime::UNIX_EPOCH))
        .collect();
    let stats = usage_stats(&sessions);
    let mut rows: Vec<UsageRow> =
        stats.domains.iter().enumerate().map(|(d, c)| UsageRow::new(domain_label(d + 1), c)).collect();
    rows.push(UsageRow::new("total".into(), &stats.total));

    #[derive(Serialize)]
    struct Report<'a> {
        sessions: usize,
        skipped_incomplete: usize,
        rows: &'a [UsageRow],
    }
    ctx.out.json("usage.json", &Report { sessions: stats.sessions, skipped_incomplete: stats.skipped_incomplete, rows: &rows })?;
    ctx.out.csv("usage.csv", &rows)?;

    ctx.say(format!("{} assisted sessions ({} incomplete skipped)", stats.sessions, stats.skipped_incomplete))?;
    ctx.say(format!(
        "{:<6} {:>16} {:>16} {:>16} {:>16} {:>6} {:>6} {:>6}",
        "", "model answer", "expert answer", "model rationale", "expert rationale", "up", "down", "added"
    ))?;
    let cell = |n: usize, p: f64| format!("{n} ({p:.1}%)");
    for r in &rows {
        ctx.say(format!(
            "{:<6} {:>16} {:>16} {:>16} {:>16} {:>6} {:>6} {:>6}",
            r.domain,
            cell(r.model_answers, r.model_answer_pct),
            cell(r.expert_answers, r.expert_answer_pct),
            cell(r.model_rationales, r.model_rationale_pct),
            cell(r.expert_rationales, r.expert_rationale_pct),
            r.upvote_questions,
            r.downvote_questions,
            r.added_paragraph_questions
        ))?;
    }
    ctx.say(format!("positive feedback share {:.1}%", stats.total.positive_feedback_pct()))?;
    ctx.finish("usage", "report usage", started)
}

pub fn report_kappa(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let started = SystemClock.now();
    let ds = ctx.dataset()?;
    let qn = Questionnaire::bundled();
    let pairs = ds.dual_annotated();
    if pairs.is_empty() {
        return Err(CliError::Config("no document in the dataset has two manual assessments".into()));
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (x, y) in &pairs {
        a.extend(x.class4_labels(&qn));
        b.extend(y.class4_labels(&qn));
    }
    let kappa = cohens_kappa_4class(&a, &b)?;
    #[derive(Serialize)]
    struct Report {
        documents: usize,
        labels: usize,
        kappa: f64,
    }
    let report = Report { documents: pairs.len(), labels: a.len(), kappa };
    ctx.out.json("kappa.json", &report)?;
    ctx.out.csv("kappa.csv", [&report])?;
    ctx.say(format!("kappa {:.3} over {} labels from {} documents", kappa, a.len(), pairs.len()))?;
    ctx.finish("kappa", "report kappa", started)
}

#[derive(Debug, Serialize)]
struct DistributionRow {
    row: String,
    low: usize,
    some_concerns: usize,
    high: usize,
    total: usize,
}

impl DistributionRow {
    fn new(row: String, c: [usize; 3]) -> Self {
        DistributionRow { row, low: c[0], some_concerns: c[1], high: c[2], total: c.iter().sum() }
    }
}

pub fn report_distribution(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let started = SystemClock.now();
    let dist = ctx.dataset()?.distribution();
    let mut rows: Vec<_> =
        dist.domains.iter().enumerate().map(|(d, c)| DistributionRow::new(domain_label(d + 1), *c)).collect();
    rows.push(DistributionRow::new("overall".into(), dist.overall));
    ctx.out.json("distribution.json", &dist)?;
    ctx.out.csv("distribution.csv", &rows)?;
    ctx.say(format!("{} assessments", dist.records))?;
    ctx.say(format!("{:<8} {:>6} {:>6} {:>6} {:>6}", "", "low", "some", "high", "total"))?;
    for r in &rows {
        ctx.say(format!("{:<8} {:>6} {:>6} {:>6} {:>6}", r.row, r.low, r.some_concerns, r.high, r.total))?;
    }
    ctx.finish("distribution", "report distribution", started)
}

pub fn report_consistency(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let started = SystemClock.now();
    let ds = ctx.dataset()?;
    let report = ds.consistency(&Questionnaire::bundled(), &RuleSet::bundled());
    ctx.out.json("consistency.json", &report)?;
    let rows: Vec<Vec<String>> = report
        .mismatches
        .iter()
        .map(|m| {
            let judgment = if m.domain == 0 { "overall".into() } else { domain_label(m.domain as usize) };
            vec![m.doc_id.to_string(), m.annotator_id.clone(), judgment, m.stored.as_str().into(), m.derived.as_str().into()]
        })
        .collect();
    ctx.out.csv_table("consistency.csv", &["doc_id", "annotator_id", "judgment", "stored", "derived"], &rows)?;
    ctx.say(format!("{} assessments re-derived, {} could not be evaluated", report.records, report.errors.len()))?;
    let per_domain: Vec<String> =
        report.domain_mismatches.iter().enumerate().map(|(d, n)| format!("{}={n}", domain_label(d + 1))).collect();
    ctx.say(format!("mismatches {} overall={}", per_domain.join(" "), report.overall_mismatches))?;
    ctx.finish("consistency", "report consistency", started)
}
