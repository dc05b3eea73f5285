use std::collections::BTreeMap;
use std::sync::Arc;

use rob2_core::clock::FixedClock;
use rob2_core::document::ingest_document;
use rob2_core::qa::{AssessConfig, Assessor, ContextMode, StubLlm};
use rob2_core::questionnaire::Questionnaire;
use rob2_core::retrieval::{Bm25Params, HashEmbedder, ParagraphIndex};
use rob2_core::rob_logic::RuleSet;
use rob2_core::store::{export_session, MemoryStore, NewSession, Provenance, Workbench};

fn assess_and_export() -> String {
    let qn = Arc::new(Questionnaire::bundled());
    let doc = ingest_document(include_bytes!("fixtures/trial.json")).unwrap();
    let index = ParagraphIndex::build(&doc, &HashEmbedder, Bm25Params::default()).unwrap();
    let llm = StubLlm::from_fn("stub", |p| {
        Ok(if p.contains("blinded") { "Probably no. Blinding is described." } else { "Yes. Stated in the text." }.into())
    });
    let assessor = Assessor::new(&qn, &llm, AssessConfig::new(ContextMode::TopK(3))).with_embedder(&HashEmbedder);
    let outcome = assessor.assess_document(&doc, &index, &BTreeMap::new());

    let wb = Workbench::with_clock(
        qn.clone(),
        Arc::new(RuleSet::bundled()),
        Box::new(MemoryStore::default()),
        Arc::new(FixedClock::epoch()),
    );
    let s = wb
        .create_session(NewSession {
            doc_id: doc.doc_id.clone(),
            annotator_id: "rev-1".into(),
            provenance: Provenance::Assisted,
            model_id: Some("stub".into()),
            context_mode: Some(ContextMode::TopK(3)),
            paragraph_count: doc.len(),
        })
        .unwrap();
    for a in outcome.model_answers() {
        wb.record_model_answer(&s.session_id, a.clone()).unwrap();
    }
    export_session(&wb.complete(&s.session_id).unwrap())
}

#[test]
fn same_inputs_give_byte_identical_export() {
    let a = assess_and_export();
    let b = assess_and_export();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["status"], "complete");
    assert_eq!(v["created_at"], "1970-01-01T00:00:00Z");
}
