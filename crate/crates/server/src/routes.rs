use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post, MethodRouter};
use axum::{Json, Router};
use rob2_core::document::{ingest_document, DocId};
use rob2_core::qa::{AssessConfig, Assessor, ContextMode, ModelAnswer};
use rob2_core::questionnaire::{Answer, Qid, QuestionnaireError};
use rob2_core::store::{NewSession, Provenance, QuestionState, StoreError, VoteDirection};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::state::{AppState, JobState};

/// JSON body whose rejections are reported as [`ApiError`].
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Body<T>(pub T);

type ApiResult<T> = Result<T, ApiError>;

/// One documented endpoint. The router and the OpenAPI document are both
/// built from [`ROUTES`].
pub struct RouteSpec {
    pub method: &'static str,
    pub path: &'static str,
    pub operation: &'static str,
    pub summary: &'static str,
    pub request: Option<&'static str>,
    pub success: u16,
    pub errors: &'static [u16],
}

const fn route(
    method: &'static str,
    path: &'static str,
    operation: &'static str,
    summary: &'static str,
    request: Option<&'static str>,
    success: u16,
    errors: &'static [u16],
) -> RouteSpec {
    RouteSpec { method, path, operation, summary, request, success, errors }
}

pub const ROUTES: &[RouteSpec] = &[
    route("post", "/documents", "ingest_document", "Ingest a parsed trial report", Some("ParsedDocument"), 201, &[400, 422]),
    route("get", "/documents/{doc_id}", "get_document", "Fetch an ingested document", None, 200, &[404]),
    route("get", "/questionnaire", "get_questionnaire", "Signaling questions with elaborations and gates", None, 200, &[]),
    route("post", "/assessments", "create_assessment", "Start an assessment session", Some("CreateAssessment"), 201, &[400, 404, 422]),
    route("get", "/assessments/{session_id}", "get_assessment", "Full session state", None, 200, &[404]),
    route("get", "/assessments/{session_id}/summary", "get_summary", "Domain and overall judgments", None, 200, &[404]),
    route("post", "/assessments/{session_id}/complete", "complete_assessment", "Mark the session complete", None, 200, &[404, 409]),
    route("get", "/assessments/{session_id}/questions/{qid}", "get_question", "Question state and activation", None, 200, &[404]),
    route(
        "post",
        "/assessments/{session_id}/questions/{qid}/answer",
        "model_answer",
        "Ask the model; 202 with a job id when it is slow",
        None,
        200,
        &[404, 409, 422, 502],
    ),
    route(
        "patch",
        "/assessments/{session_id}/questions/{qid}/answer",
        "override_answer",
        "Reviewer answer and/or rationale",
        Some("OverrideAnswer"),
        200,
        &[400, 404, 409, 422],
    ),
    route("post", "/assessments/{session_id}/questions/{qid}/votes", "vote", "Vote on an evidence paragraph", Some("Vote"), 200, &[400, 404, 409]),
    route(
        "post",
        "/assessments/{session_id}/questions/{qid}/paragraphs",
        "add_paragraph",
        "Add a paragraph as evidence",
        Some("AddParagraph"),
        200,
        &[400, 404, 409, 422],
    ),
    route("get", "/jobs/{job_id}", "get_job", "Poll a slow model answer", None, 200, &[404]),
    route("get", "/openapi.json", "openapi", "This document", None, 200, &[]),
];

fn handler(operation: &str) -> MethodRouter<AppState> {
    match operation {
        "ingest_document" => post(ingest),
        "get_document" => get(get_document),
        "get_questionnaire" => get(get_questionnaire),
        "create_assessment" => post(create_assessment),
        "get_assessment" => get(get_assessment),
        "get_summary" => get(get_summary),
        "complete_assessment" => post(complete_assessment),
        "get_question" => get(get_question),
        "model_answer" => post(model_answer),
        "override_answer" => patch(override_answer),
        "vote" => post(vote),
        "add_paragraph" => post(add_paragraph),
        "get_job" => get(get_job),
        "openapi" => get(openapi),
        other => unreachable!("no handler for {other}"),
    }
}

pub fn router(state: AppState) -> Router {
    let mut by_path: BTreeMap<&str, MethodRouter<AppState>> = BTreeMap::new();
    for r in ROUTES {
        let h = handler(r.operation);
        let merged = match by_path.remove(r.path) {
            Some(existing) => existing.merge(h),
            None => h,
        };
        by_path.insert(r.path, merged);
    }
    let mut app = Router::new();
    for (path, h) in by_path {
        app = app.route(path, h);
    }
    app.fallback(|| async { ApiError::not_found("no_route", "no such endpoint") }).with_state(state)
}

fn qid(raw: &str) -> ApiResult<Qid> {
    raw.parse().map_err(|_| ApiError::not_found("unknown_question", format!("unknown question {raw:?}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

async fn ingest(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let doc = ingest_document(&body)?;
    let doc_id = doc.doc_id.clone();
    let paragraphs = doc.len();
    let created = blocking({
        let state = state.clone();
        move || state.insert_document(doc)
    })
    .await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(json!({"doc_id": doc_id, "paragraphs": paragraphs}))).into_response())
}

async fn get_document(State(state): State<AppState>, Path(doc_id): Path<String>) -> ApiResult<Response> {
    let d = state.document(&DocId::new(doc_id))?;
    Ok(Json(&d.doc).into_response())
}

async fn get_questionnaire(State(state): State<AppState>) -> Response {
    Json(state.questionnaire()).into_response()
}

#[derive(Deserialize)]
struct CreateAssessment {
    doc_id: DocId,
    #[serde(default)]
    mode: Option<ContextMode>,
    #[serde(default)]
    model: Option<String>,
    #[serde(default = "default_annotator")]
    annotator_id: String,
    #[serde(default)]
    provenance: Option<Provenance>,
}

fn default_annotator() -> String {
    "anonymous".into()
}

async fn create_assessment(State(state): State<AppState>, Body(req): Body<CreateAssessment>) -> ApiResult<Response> {
    let doc = state.document(&req.doc_id)?;
    let provenance = req.provenance.unwrap_or(Provenance::Assisted);
    let (model_id, context_mode) = match provenance {
        Provenance::Manual => (None, None),
        Provenance::Assisted => {
            let model = req.model.or_else(|| state.settings().llm_model.clone()).ok_or_else(|| {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "model_required", "no model given and LLM_MODEL is not set")
            })?;
            (Some(model), Some(req.mode.unwrap_or(ContextMode::TopK(3))))
        }
    };
    let session = state.workbench().create_session(NewSession {
        doc_id: req.doc_id,
        annotator_id: req.annotator_id,
        provenance,
        model_id,
        context_mode,
        paragraph_count: doc.doc.len(),
    })?;
    Ok((StatusCode::CREATED, Json(json!({"session_id": session.session_id}))).into_response())
}

async fn get_assessment(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.workbench().get(&id)?).into_response())
}

async fn get_summary(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.workbench().summary(&id)?).into_response())
}

async fn complete_assessment(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    state.workbench().complete(&id)?;
    Ok(Json(state.workbench().summary(&id)?).into_response())
}

async fn get_question(State(state): State<AppState>, Path((id, q)): Path<(String, String)>) -> ApiResult<Json<QuestionState>> {
    Ok(Json(state.workbench().question(&id, qid(&q)?)?))
}

/// Checks preconditions, then asks the model on a blocking thread. The
/// answer is journaled before it is returned or published to the job.
async fn model_answer(State(state): State<AppState>, Path((id, q)): Path<(String, String)>) -> ApiResult<Response> {
    let qid = qid(&q)?;
    let session = state.workbench().get(&id)?;
    if state.questionnaire().get(qid).is_none() {
        return Err(QuestionnaireError::UnknownQuestion(qid).into());
    }
    if !session.activation(state.questionnaire(), qid)? {
        return Err(StoreError::GatedOff(qid).into());
    }
    if session.records.get(&qid).is_some_and(|r| r.model_answer.is_some()) {
        return Err(StoreError::AlreadyAnswered(qid).into());
    }
    let (Some(model), Some(mode)) = (session.model_id.clone(), session.context_mode) else {
        return Err(ApiError::new(StatusCode::CONFLICT, "manual_session", "session has no model"));
    };
    let llm = state.llm(&model)?;
    let doc = state.document(&session.doc_id)?;

    let job_id = state.new_job(&id, &q);
    let (tx, rx) = tokio::sync::oneshot::channel();
    let work = {
        let state = state.clone();
        let id = id.clone();
        move || -> ApiResult<ModelAnswer> {
            let assessor = Assessor::new(state.questionnaire(), llm.as_ref(), AssessConfig::new(mode))
                .with_embedder(state.0.embedder.as_ref());
            let answer = assessor.answer_question(&doc.doc, &doc.index, qid, None)?;
            state.workbench().record_model_answer(&id, answer.clone())?;
            Ok(answer)
        }
    };
    tokio::spawn({
        let state = state.clone();
        let job_id = job_id.clone();
        async move {
            let result = blocking(work).await;
            let job = match &result {
                Ok(a) => JobState::Done { session_id: id, answer: Box::new(a.clone()) },
                Err(e) => JobState::Failed { session_id: id, error: e.clone() },
            };
            state.set_job(&job_id, job);
            let _ = tx.send(result);
        }
    });
    match tokio::time::timeout(state.settings().answer_timeout(), rx).await {
        Ok(Ok(result)) => Ok(Json(result?).into_response()),
        Ok(Err(_)) => Err(ApiError::internal("answer task dropped")),
        Err(_) => Ok((
            StatusCode::ACCEPTED,
            Json(json!({"job_id": job_id, "status": "pending", "poll": format!("/jobs/{job_id}")})),
        )
            .into_response()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideAnswer {
    #[serde(default)]
    answer: Option<Answer>,
    #[serde(default)]
    rationale: Option<String>,
}

async fn override_answer(
    State(state): State<AppState>,
    Path((id, q)): Path<(String, String)>,
    Body(req): Body<OverrideAnswer>,
) -> ApiResult<Json<QuestionState>> {
    let qid = qid(&q)?;
    let wb = state.workbench();
    match (req.answer, req.rationale) {
        (Some(a), rationale) => wb.record_override(&id, qid, a, rationale)?,
        (None, Some(r)) => wb.edit_rationale(&id, qid, r)?,
        (None, None) => return Err(ApiError::bad_request("give an answer, a rationale or both")),
    };
    Ok(Json(wb.question(&id, qid)?))
}

#[derive(Deserialize)]
struct Vote {
    paragraph_index: usize,
    direction: VoteDirection,
}

async fn vote(
    State(state): State<AppState>,
    Path((id, q)): Path<(String, String)>,
    Body(req): Body<Vote>,
) -> ApiResult<Json<QuestionState>> {
    let qid = qid(&q)?;
    state.workbench().record_vote(&id, qid, req.paragraph_index, req.direction)?;
    Ok(Json(state.workbench().question(&id, qid)?))
}

#[derive(Deserialize)]
struct AddParagraph {
    paragraph_index: usize,
}

async fn add_paragraph(
    State(state): State<AppState>,
    Path((id, q)): Path<(String, String)>,
    Body(req): Body<AddParagraph>,
) -> ApiResult<Json<QuestionState>> {
    let qid = qid(&q)?;
    state.workbench().add_paragraph(&id, qid, req.paragraph_index)?;
    Ok(Json(state.workbench().question(&id, qid)?))
}

async fn get_job(State(state): State<AppState>, Path(job_id): Path<String>) -> ApiResult<Json<JobState>> {
    state.job(&job_id).map(Json).ok_or_else(|| ApiError::not_found("job_not_found", format!("job {job_id} not found")))
}

async fn openapi() -> Json<Value> {
    Json(openapi_document())
}

fn request_schema(name: &str) -> Value {
    let answer_enum = json!(["yes", "probably_yes", "probably_no", "no", "no_information"]);
    match name {
        "ParsedDocument" => json!({
            "type": "object",
            "description": "doc2json output (body_text or pdf_parse layout) or an exported document",
        }),
        "CreateAssessment" => json!({
            "type": "object",
            "required": ["doc_id"],
            "properties": {
                "doc_id": {"type": "string"},
                "mode": {"type": "string", "example": "topk:3"},
                "model": {"type": "string"},
                "annotator_id": {"type": "string"},
                "provenance": {"type": "string", "enum": ["manual", "assisted"]},
            },
        }),
        "OverrideAnswer" => json!({
            "type": "object",
            "properties": {"answer": {"type": "string", "enum": answer_enum}, "rationale": {"type": "string"}},
        }),
        "Vote" => json!({
            "type": "object",
            "required": ["paragraph_index", "direction"],
            "properties": {
                "paragraph_index": {"type": "integer", "minimum": 0},
                "direction": {"type": "string", "enum": ["up", "down"]},
            },
        }),
        "AddParagraph" => json!({
            "type": "object",
            "required": ["paragraph_index"],
            "properties": {"paragraph_index": {"type": "integer", "minimum": 0}},
        }),
        other => unreachable!("no schema for {other}"),
    }
}

pub fn openapi_document() -> Value {
    let mut paths: BTreeMap<&str, serde_json::Map<String, Value>> = BTreeMap::new();
    let mut schemas = serde_json::Map::new();
    schemas.insert(
        "ApiError".into(),
        json!({
            "type": "object",
            "required": ["status", "code", "message"],
            "properties": {
                "status": {"type": "integer"},
                "code": {"type": "string"},
                "message": {"type": "string"},
                "retry_after_secs": {"type": "integer"},
            },
        }),
    );
    for r in ROUTES {
        let params: Vec<Value> = r
            .path
            .split('/')
            .filter_map(|seg| seg.strip_prefix('{').and_then(|s| s.strip_suffix('}')))
            .map(|name| json!({"name": name, "in": "path", "required": true, "schema": {"type": "string"}}))
            .collect();
        let mut responses = serde_json::Map::new();
        responses.insert(r.success.to_string(), json!({"description": "success"}));
        if r.operation == "model_answer" {
            responses.insert("202".into(), json!({"description": "answer pending; poll the job"}));
        }
        for code in r.errors {
            responses.insert(
                code.to_string(),
                json!({"description": "error", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/ApiError"}}}}),
            );
        }
        let mut op = json!({"operationId": r.operation, "summary": r.summary, "parameters": params, "responses": responses});
        if let Some(req) = r.request {
            schemas.insert(req.into(), request_schema(req));
            op["requestBody"] = json!({
                "required": true,
                "content": {"application/json": {"schema": {"$ref": format!("#/components/schemas/{req}")}}},
            });
        }
        paths.entry(r.path).or_default().insert(r.method.into(), op);
    }
    json!({
        "openapi": "3.0.3",
        "info": {"title": "ROB2 assessment service", "version": env!("CARGO_PKG_VERSION")},
        "paths": paths,
        "components": {"schemas": schemas},
    })
}
