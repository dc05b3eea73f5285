use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use rob2_core::document::DocumentError;
use rob2_core::qa::{LlmError, QaError};
use rob2_core::questionnaire::QuestionnaireError;
use rob2_core::retrieval::RetrievalError;
use rob2_core::store::StoreError;
use serde::{Deserialize, Serialize};

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{status} {code}: {message}")]
pub struct ApiError {
    pub status: u16,
    /// Stable machine-readable code.
    pub code: String,
    pub message: String,
    /// Present on upstream failures that may succeed when repeated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_after_secs: Option<u64>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status: status.as_u16(), code: code.to_owned(), message: message.into(), retry_after_secs: None }
    }

    pub fn not_found(code: &str, what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, what)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut resp = (status, Json(&self)).into_response();
        if let Some(secs) = self.retry_after_secs {
            resp.headers_mut().insert("retry-after", secs.into());
        }
        resp
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

fn store_code(e: &StoreError) -> (StatusCode, &'static str) {
    use StatusCode as S;
    match e {
        StoreError::NotFound(_) => (S::NOT_FOUND, "session_not_found"),
        StoreError::Exists(_) => (S::CONFLICT, "session_exists"),
        StoreError::Complete => (S::CONFLICT, "session_complete"),
        StoreError::GatedOff(_) => (S::CONFLICT, "question_gated_off"),
        StoreError::Undetermined { .. } => (S::CONFLICT, "question_undetermined"),
        StoreError::AlreadyAnswered(_) => (S::CONFLICT, "already_answered"),
        StoreError::Unanswered(_) => (S::CONFLICT, "question_unanswered"),
        StoreError::NotEvidence { .. } => (S::CONFLICT, "not_evidence"),
        StoreError::AlreadyEvidence { .. } => (S::CONFLICT, "already_evidence"),
        StoreError::NoSuchParagraph { .. } => (S::UNPROCESSABLE_ENTITY, "no_such_paragraph"),
        StoreError::InvalidAnswer(_) => (S::UNPROCESSABLE_ENTITY, "invalid_answer"),
        StoreError::Incomplete(_) => (S::CONFLICT, "session_incomplete"),
        StoreError::Questionnaire(q) => questionnaire_code(q),
        StoreError::Rules(_) => (S::INTERNAL_SERVER_ERROR, "rule_engine"),
        StoreError::SchemaVersion(_) => (S::UNPROCESSABLE_ENTITY, "schema_version"),
        StoreError::Malformed(_) => (S::UNPROCESSABLE_ENTITY, "malformed_session"),
        StoreError::Io(_) => (S::INTERNAL_SERVER_ERROR, "storage"),
    }
}

fn questionnaire_code(e: &QuestionnaireError) -> (StatusCode, &'static str) {
    match e {
        QuestionnaireError::UnknownQuestion(_) => (StatusCode::NOT_FOUND, "unknown_question"),
        QuestionnaireError::Sequencing { .. } => (StatusCode::CONFLICT, "gate_sequencing"),
        QuestionnaireError::MissingAnswer(_) => (StatusCode::CONFLICT, "missing_answer"),
        QuestionnaireError::Io(_)
        | QuestionnaireError::Parse(_)
        | QuestionnaireError::Invalid { .. }
        | QuestionnaireError::DomainSize { .. }
        | QuestionnaireError::CrossDomainGate { .. }
        | QuestionnaireError::GateOrder { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "questionnaire"),
    }
}

fn llm_code(e: &LlmError) -> (StatusCode, &'static str) {
    match e {
        LlmError::Transport(_) => (StatusCode::BAD_GATEWAY, "llm_unreachable"),
        LlmError::Status { .. } => (StatusCode::BAD_GATEWAY, "llm_status"),
        LlmError::Malformed(_) => (StatusCode::BAD_GATEWAY, "llm_malformed"),
        LlmError::Config(_) => (StatusCode::UNPROCESSABLE_ENTITY, "llm_config"),
    }
}

fn retrieval_code(e: &RetrievalError) -> (StatusCode, &'static str) {
    match e {
        RetrievalError::IndexBuild { .. } | RetrievalError::Query(_) => (StatusCode::BAD_GATEWAY, "embedding_failed"),
        RetrievalError::ModelMismatch { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "embedding_mismatch"),
        RetrievalError::InvalidK => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_k"),
        RetrievalError::MissingVector { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "missing_vector"),
    }
}

fn qa_code(e: &QaError) -> (StatusCode, &'static str) {
    match e {
        QaError::NoPassages(_) => (StatusCode::UNPROCESSABLE_ENTITY, "no_passages"),
        QaError::Contamination { .. } => (StatusCode::CONFLICT, "fewshot_contamination"),
        QaError::Unparseable { .. } => (StatusCode::BAD_GATEWAY, "llm_unparseable"),
        QaError::ContextOverflow { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "context_overflow"),
        QaError::NoOracleEvidence(_) => (StatusCode::CONFLICT, "no_oracle_evidence"),
        QaError::Llm(l) => llm_code(l),
        QaError::Retrieval(r) => retrieval_code(r),
        QaError::Gating(q) => questionnaire_code(q),
    }
}

fn document_code(e: &DocumentError) -> (StatusCode, &'static str) {
    match e {
        DocumentError::Parse(_) => (StatusCode::BAD_REQUEST, "malformed_document"),
        DocumentError::Empty => (StatusCode::UNPROCESSABLE_ENTITY, "empty_document"),
    }
}

fn build((status, code): (StatusCode, &'static str), message: String) -> ApiError {
    let mut e = ApiError::new(status, code, message);
    if status == StatusCode::BAD_GATEWAY {
        e.retry_after_secs = Some(5);
    }
    e
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        build(store_code(&e), e.to_string())
    }
}

impl From<QaError> for ApiError {
    fn from(e: QaError) -> Self {
        build(qa_code(&e), e.to_string())
    }
}

impl From<LlmError> for ApiError {
    fn from(e: LlmError) -> Self {
        build(llm_code(&e), e.to_string())
    }
}

impl From<RetrievalError> for ApiError {
    fn from(e: RetrievalError) -> Self {
        build(retrieval_code(&e), e.to_string())
    }
}

impl From<DocumentError> for ApiError {
    fn from(e: DocumentError) -> Self {
        build(document_code(&e), e.to_string())
    }
}

impl From<QuestionnaireError> for ApiError {
    fn from(e: QuestionnaireError) -> Self {
        build(questionnaire_code(&e), e.to_string())
    }
}
