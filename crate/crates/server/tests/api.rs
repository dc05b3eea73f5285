use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rob2_core::clock::FixedClock;
use rob2_core::config::Settings;
use rob2_core::qa::{LlmError, StubLlm};
use rob2_core::questionnaire::Questionnaire;
use rob2_core::rob_logic::RuleSet;
use rob2_core::store::MemoryStore;
use rob2_server::{router, AppState, ROUTES};
use serde_json::{json, Value};
use tower::ServiceExt;

const TRIAL: &[u8] = include_bytes!("../../core/tests/fixtures/trial.json");

fn state(settings: Settings) -> AppState {
    AppState::new(settings, Box::new(MemoryStore::new()), Arc::new(FixedClock::epoch()))
}

fn app() -> Router {
    router(state(Settings::default()).with_llm(Arc::new(StubLlm::fixed("stub-yes", "Yes. Reported."))))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn raw_post(app: &Router, uri: &str, body: &[u8]) -> (StatusCode, Value) {
    let req = Request::builder().method("POST").uri(uri).body(Body::from(body.to_vec())).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn session(app: &Router, model: &str) -> String {
    let (s, doc) = raw_post(app, "/documents", TRIAL).await;
    assert!(s.is_success());
    let (s, body) =
        call(app, "POST", "/assessments", Some(json!({"doc_id": doc["doc_id"], "model": model, "mode": "topk:3"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    body["session_id"].as_str().unwrap().to_owned()
}

#[tokio::test]
async fn document_upload_is_idempotent_and_validated() {
    let app = app();
    let (s, first) = raw_post(&app, "/documents", TRIAL).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(first["doc_id"], "fixture-trial-001");
    assert_eq!(first["paragraphs"], 8);
    let (s, again) = raw_post(&app, "/documents", TRIAL).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(again["doc_id"], first["doc_id"]);

    let (s, err) = raw_post(&app, "/documents", b"{not json").await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("malformed_document")));
    let empty = json!({"paper_id": "e", "title": "t", "body_text": [{"text": "  ", "section": ""}]});
    let (s, err) = raw_post(&app, "/documents", empty.to_string().as_bytes()).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("empty_document")));

    let (s, doc) = call(&app, "GET", "/documents/fixture-trial-001", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(doc["paragraphs"].as_array().unwrap().len(), 8);
    let (s, err) = call(&app, "GET", "/documents/nope", None).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::NOT_FOUND, Some("document_not_found")));
}

#[tokio::test]
async fn model_answer_is_journaled_and_gates_follow() {
    let app = app();
    let id = session(&app, "stub-yes").await;

    // 2.3 depends on 2.1 and 2.2, so it is undetermined at first.
    let (_, q) = call(&app, "GET", &format!("/assessments/{id}/questions/2.3"), None).await;
    assert_eq!(q["active"], Value::Null);
    let (s, err) = call(&app, "POST", &format!("/assessments/{id}/questions/2.3/answer"), None).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::CONFLICT, Some("question_undetermined")));

    let (s, a) = call(&app, "POST", &format!("/assessments/{id}/questions/2.1/answer"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(a["answer"], "yes");
    assert_eq!(a["evidence"].as_array().unwrap().len(), 3);
    let (s, err) = call(&app, "POST", &format!("/assessments/{id}/questions/2.1/answer"), None).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::CONFLICT, Some("already_answered")));

    // 2.1 = Y switches 2.3 on whatever 2.2 says.
    let (_, q) = call(&app, "GET", &format!("/assessments/{id}/questions/2.3"), None).await;
    assert_eq!(q["active"], true);
    let (_, session) = call(&app, "GET", &format!("/assessments/{id}"), None).await;
    assert_eq!(session["records"]["2.1"]["model_answer"]["answer"], "yes");
}

#[tokio::test]
async fn activation_of_2_3_matches_the_gate_for_every_pair() {
    let app = app();
    let on = |a: &str| matches!(a, "yes" | "probably_yes" | "no_information");
    let answers = ["yes", "probably_yes", "probably_no", "no", "no_information"];
    for a1 in answers {
        for a2 in answers {
            let id = session(&app, "stub-yes").await;
            for (qid, a) in [("2.1", a1), ("2.2", a2)] {
                let (s, _) =
                    call(&app, "PATCH", &format!("/assessments/{id}/questions/{qid}/answer"), Some(json!({"answer": a}))).await;
                assert_eq!(s, StatusCode::OK);
            }
            let (_, q) = call(&app, "GET", &format!("/assessments/{id}/questions/2.3"), None).await;
            assert_eq!(q["active"], on(a1) || on(a2), "{a1} {a2}");
        }
    }
}

#[tokio::test]
async fn three_high_domains_give_high_overall_summary() {
    let app = app();
    let id = session(&app, "stub-yes").await;
    // D1 low, D2 high, D3 high, D4 high, D5 low.
    let answers = [
        ("1.1", "yes"),
        ("1.2", "yes"),
        ("1.3", "no"),
        ("2.1", "no"),
        ("2.2", "no"),
        ("2.6", "no"),
        ("2.7", "yes"),
        ("3.1", "no"),
        ("3.2", "no"),
        ("3.3", "yes"),
        ("3.4", "yes"),
        ("4.1", "yes"),
        ("4.2", "no"),
        ("5.1", "yes"),
        ("5.2", "no"),
        ("5.3", "no"),
    ];
    for (qid, a) in answers {
        let (s, body) =
            call(&app, "PATCH", &format!("/assessments/{id}/questions/{qid}/answer"), Some(json!({"answer": a}))).await;
        assert_eq!(s, StatusCode::OK, "{qid}: {body}");
    }
    let (s, summary) = call(&app, "GET", &format!("/assessments/{id}/summary"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(summary["unanswered"], json!([]));
    assert_eq!(summary["domain_judgments"], json!(["low", "high", "high", "high", "low"]));
    assert_eq!(summary["overall"], "high");

    // Identical to calling the rule engine directly.
    let qn = Questionnaire::bundled();
    let mut map = std::collections::BTreeMap::new();
    for q in qn.questions() {
        let a = answers.iter().find(|(k, _)| *k == q.qid.to_string()).map(|(_, a)| *a).unwrap_or("not_applicable");
        map.insert(q.qid, serde_json::from_value(json!(a)).unwrap());
    }
    let j = RuleSet::bundled().judge(&qn, &map).unwrap();
    assert_eq!(summary["overall"], serde_json::to_value(j.overall).unwrap());

    let (s, done) = call(&app, "POST", &format!("/assessments/{id}/complete"), None).await;
    assert_eq!((s, done["status"].as_str()), (StatusCode::OK, Some("complete")));
    let (s, err) =
        call(&app, "PATCH", &format!("/assessments/{id}/questions/1.1/answer"), Some(json!({"answer": "no"}))).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::CONFLICT, Some("session_complete")));
}

#[tokio::test]
async fn votes_and_added_paragraphs() {
    let app = app();
    let id = session(&app, "stub-yes").await;
    let (_, a) = call(&app, "POST", &format!("/assessments/{id}/questions/1.1/answer"), None).await;
    let shown: Vec<u64> = a["evidence"].as_array().unwrap().iter().map(|e| e["paragraph_index"].as_u64().unwrap()).collect();
    let other = (0..8).find(|p| !shown.contains(p)).unwrap();

    let uri = format!("/assessments/{id}/questions/1.1/votes");
    let (s, q) = call(&app, "POST", &uri, Some(json!({"paragraph_index": shown[0], "direction": "up"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(q["record"]["votes"][0]["direction"], "up");
    let (_, q) = call(&app, "POST", &uri, Some(json!({"paragraph_index": shown[0], "direction": "down"}))).await;
    assert_eq!(q["record"]["votes"].as_array().unwrap().len(), 1);
    assert_eq!(q["record"]["votes"][0]["direction"], "down");
    let (s, err) = call(&app, "POST", &uri, Some(json!({"paragraph_index": other, "direction": "up"}))).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::CONFLICT, Some("not_evidence")));
    let (s, err) = call(&app, "POST", &uri, Some(json!({"paragraph_index": 0}))).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));

    let uri = format!("/assessments/{id}/questions/1.1/paragraphs");
    let (s, q) = call(&app, "POST", &uri, Some(json!({"paragraph_index": other}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(q["record"]["added_paragraphs"], json!([other]));
    let (s, err) = call(&app, "POST", &uri, Some(json!({"paragraph_index": 99}))).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("no_such_paragraph")));

    let (s, q) = call(
        &app,
        "PATCH",
        &format!("/assessments/{id}/questions/1.1/answer"),
        Some(json!({"rationale": "Sealed envelopes."})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(q["record"]["final_rationale"], "Sealed envelopes.");
    assert_eq!(q["record"]["final_answer"], "yes");
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let app = app();
    for uri in ["/assessments/s-missing", "/assessments/s-missing/summary", "/jobs/job-0", "/nowhere"] {
        let (s, body) = call(&app, "GET", uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert!(body["code"].is_string());
    }
    let id = session(&app, "stub-yes").await;
    let (s, err) = call(&app, "GET", &format!("/assessments/{id}/questions/9.9"), None).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_question")));
}

#[tokio::test]
async fn upstream_failure_is_502_with_retry_hint() {
    let down = StubLlm::from_fn("down", |_| Err(LlmError::Transport("connection refused".into())));
    let app = router(state(Settings::default()).with_llm(Arc::new(down)));
    let id = session(&app, "down").await;
    let req = Request::builder().method("POST").uri(format!("/assessments/{id}/questions/1.1/answer")).body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_GATEWAY);
    assert_eq!(resp.headers()["retry-after"], "5");
    // Nothing was journaled.
    let (_, q) = call(&app, "GET", &format!("/assessments/{id}/questions/1.1"), None).await;
    assert_eq!(q["record"]["model_answer"], Value::Null);
}

#[tokio::test]
async fn slow_model_answers_202_then_job_completes() {
    let slow = StubLlm::from_fn("slow", |_| {
        std::thread::sleep(Duration::from_millis(1500));
        Ok("No information".into())
    });
    let settings = Settings { answer_timeout_secs: Some(0), ..Default::default() };
    let app = router(state(settings).with_llm(Arc::new(slow)));
    let id = session(&app, "slow").await;
    let (s, pending) = call(&app, "POST", &format!("/assessments/{id}/questions/1.2/answer"), None).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let poll = pending["poll"].as_str().unwrap().to_owned();
    let mut job = Value::Null;
    for _ in 0..50 {
        job = call(&app, "GET", &poll, None).await.1;
        if job["status"] != "pending" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
    assert_eq!(job["status"], "done");
    assert_eq!(job["answer"]["answer"], "no_information");
    let (_, q) = call(&app, "GET", &format!("/assessments/{id}/questions/1.2"), None).await;
    assert_eq!(q["record"]["final_answer"], "no_information");
}

#[tokio::test]
async fn manual_sessions_and_model_requirement() {
    let app = router(state(Settings::default()));
    let (_, doc) = raw_post(&app, "/documents", TRIAL).await;
    let (s, err) = call(&app, "POST", "/assessments", Some(json!({"doc_id": doc["doc_id"]}))).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("model_required")));
    let (s, body) =
        call(&app, "POST", "/assessments", Some(json!({"doc_id": doc["doc_id"], "provenance": "manual"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = body["session_id"].as_str().unwrap();
    let (s, err) = call(&app, "POST", &format!("/assessments/{id}/questions/1.1/answer"), None).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::CONFLICT, Some("manual_session")));
    let (s, err) = call(&app, "POST", "/assessments", Some(json!({"doc_id": "nope", "provenance": "manual"}))).await;
    assert_eq!((s, err["code"].as_str()), (StatusCode::NOT_FOUND, Some("document_not_found")));

    // The offline model works without an endpoint.
    let id = session(&app, "stub").await;
    let (s, a) = call(&app, "POST", &format!("/assessments/{id}/questions/1.1/answer"), None).await;
    assert_eq!(s, StatusCode::OK, "{a}");
    assert_eq!(a["model_id"], "stub");
}

#[tokio::test]
async fn openapi_lists_every_route_and_every_route_is_served() {
    let app = app();
    let (s, doc) = call(&app, "GET", "/openapi.json", None).await;
    assert_eq!(s, StatusCode::OK);
    let mut seen: HashMap<(String, String), bool> = HashMap::new();
    for (path, ops) in doc["paths"].as_object().unwrap() {
        for method in ops.as_object().unwrap().keys() {
            seen.insert((method.clone(), path.clone()), true);
        }
    }
    assert_eq!(seen.len(), ROUTES.len());
    for r in ROUTES {
        assert!(seen.contains_key(&(r.method.to_owned(), r.path.to_owned())));
        let uri = r.path.replace("{doc_id}", "x").replace("{session_id}", "x").replace("{qid}", "1.1").replace("{job_id}", "x");
        let req = Request::builder().method(r.method.to_uppercase().as_str()).uri(&uri).header("content-type", "application/json");
        let resp = app.clone().oneshot(req.body(Body::from("{}")).unwrap()).await.unwrap();
        assert_ne!(resp.status(), StatusCode::METHOD_NOT_ALLOWED, "{} {uri}", r.method);
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let body: Value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        assert_ne!(body["code"], "no_route", "{} {uri}", r.method);
    }
    assert_eq!(
        doc["paths"]["/assessments/{session_id}/questions/{qid}/votes"]["post"]["requestBody"]["content"]["application/json"]
            ["schema"]["$ref"],
        "#/components/schemas/Vote"
    );
}
