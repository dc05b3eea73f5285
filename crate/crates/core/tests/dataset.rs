use std::path::PathBuf;

use chrono::DateTime;
use rob2_core::dataset::{align_evidence, Dataset, DatasetError};
use rob2_core::evaluation::cohens_kappa_4class;
use rob2_core::questionnaire::Questionnaire;
use rob2_core::rob_logic::RuleSet;
use rob2_core::store::usage_stats;
use serde_json::Value;

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../testdata/corpus")
}

fn raw_records() -> Vec<Value> {
    std::fs::read_to_string(corpus().join("assessments.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn missing_dataset_explains_how_to_get_it() {
    let err = Dataset::load("/nonexistent/rob2").err().unwrap();
    assert!(matches!(err, DatasetError::Missing { .. }));
    assert!(err.to_string().contains("assessments.jsonl"));
}

#[test]
fn fixture_corpus_loads() {
    let ds = Dataset::load(corpus()).unwrap();
    assert_eq!(ds.records.len(), 8);
    assert_eq!(ds.documents.len(), 6);
    assert_eq!(ds.manual().count(), 4);
    assert_eq!(ds.assisted().count(), 4);
    assert_eq!(ds.vectors.as_ref().unwrap().model_id, "fixture-ref-32");
    assert_eq!(ds.dual_annotated().len(), 2);
}

#[test]
fn distribution_matches_raw_tally() {
    let ds = Dataset::load(corpus()).unwrap();
    let levels = ["low", "some_concerns", "high"];
    let mut domains = [[0usize; 3]; 5];
    let mut overall = [0usize; 3];
    for r in raw_records() {
        for (d, level) in r["domain_judgments"].as_array().unwrap().iter().enumerate() {
            domains[d][levels.iter().position(|l| l == level).unwrap()] += 1;
        }
        overall[levels.iter().position(|l| *l == r["overall"]).unwrap()] += 1;
    }
    let dist = ds.distribution();
    assert_eq!(dist.domains, domains);
    assert_eq!(dist.overall, overall);
    assert_eq!(dist.records, 8);
}

#[test]
fn consistency_report_finds_the_planted_mismatch() {
    let ds = Dataset::load(corpus()).unwrap();
    let report = ds.consistency(&Questionnaire::bundled(), &RuleSet::bundled());
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    assert_eq!(report.domain_mismatches, [0, 0, 1, 0, 0]);
    assert_eq!(report.mismatches.len(), 1);
    assert_eq!(report.mismatches[0].doc_id.as_str(), "trial-e");
}

#[test]
fn annotator_evidence_aligns_to_its_paragraph() {
    let ds = Dataset::load(corpus()).unwrap();
    let fold = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let mut aligned = 0;
    for r in &ds.records {
        let doc = &ds.documents[&r.doc_id];
        for (qid, ev) in r.oracle_evidence(doc) {
            let i = ev.paragraph_index.unwrap_or_else(|| panic!("{} {qid} unaligned", r.doc_id));
            assert_eq!(fold(&doc.paragraphs[i].text), fold(&ev.text));
            aligned += 1;
        }
    }
    assert!(aligned > 50);
    let doc = &ds.documents[&"trial-a".into()];
    assert_eq!(align_evidence(doc, "completely unrelated words about cooking pasta"), None);
}

#[test]
fn usage_counts_match_raw_records() {
    let ds = Dataset::load(corpus()).unwrap();
    let docs = &ds.documents;
    let sessions: Vec<_> = ds
        .assisted()
        .map(|r| r.to_session(docs[&r.doc_id].len(), DateTime::UNIX_EPOCH))
        .collect();
    let stats = usage_stats(&sessions);
    assert_eq!(stats.sessions, 4);

    let (mut model, mut expert, mut up_q, mut down_q, mut added_q) = (0, 0, 0, 0, 0);
    for r in raw_records().iter().filter(|r| r["provenance"] == "assisted") {
        for q in r["questions"].as_object().unwrap().values() {
            if q["answer"] == "NA" {
                continue;
            }
            if q["answer"] == q["model_answer"] {
                model += 1;
            } else {
                expert += 1;
            }
            let nonempty = |k: &str| q.get(k).and_then(Value::as_array).is_some_and(|a| !a.is_empty());
            up_q += usize::from(nonempty("upvotes"));
            down_q += usize::from(nonempty("downvotes"));
            added_q += usize::from(nonempty("added_paragraphs"));
        }
    }
    let t = stats.total;
    assert_eq!((t.model_answers, t.expert_answers), (model, expert));
    assert_eq!((t.upvote_questions, t.downvote_questions, t.added_paragraph_questions), (up_q, down_q, added_q));
}

#[test]
fn dual_annotated_kappa_is_defined() {
    let ds = Dataset::load(corpus()).unwrap();
    let qn = Questionnaire::bundled();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (x, y) in ds.dual_annotated() {
        a.extend(x.class4_labels(&qn));
        b.extend(y.class4_labels(&qn));
    }
    assert_eq!(a.len(), 44);
    let k = cohens_kappa_4class(&a, &b).unwrap();
    assert!((-1.0..=1.0).contains(&k));
}

fn released() -> Option<Dataset> {
    let dir = std::env::var_os("ROB2_DATASET_DIR")?;
    Some(Dataset::load(dir).expect("ROB2_DATASET_DIR does not hold a readable dataset"))
}

#[test]
#[ignore = "needs the released dataset in ROB2_DATASET_DIR"]
fn released_distribution_table() {
    let ds = released().expect("set ROB2_DATASET_DIR");
    let d = ds.distribution();
    assert_eq!(d.records, 521);
    assert_eq!(d.overall, [64, 301, 156]);
    assert_eq!(
        d.domains,
        [[234, 243, 44], [287, 171, 63], [450, 35, 35], [406, 60, 54], [332, 272, 34]]
    );
}

#[test]
#[ignore = "needs the released dataset in ROB2_DATASET_DIR"]
fn released_usage_tables() {
    let ds = released().expect("set ROB2_DATASET_DIR");
    let sessions: Vec<_> = ds
        .assisted()
        .map(|r| r.to_session(ds.documents.get(&r.doc_id).map_or(0, |d| d.len()), DateTime::UNIX_EPOCH))
        .collect();
    let stats = usage_stats(&sessions);
    let t = stats.total;
    assert_eq!((t.model_answers, t.expert_answers), (2621, 1930));
    assert_eq!((t.model_rationales, t.expert_rationales), (3243, 1308));
    assert_eq!((t.upvote_questions, t.downvote_questions, t.added_paragraph_questions), (480, 135, 356));
    let by_domain: Vec<_> = stats.domains.iter().map(|d| d.model_answers).collect();
    assert_eq!(by_domain, [377, 853, 432, 591, 368]);
}
