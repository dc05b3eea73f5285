//! HTTP adapter over the assessment workbench.
//!
//! Handlers validate input, call one core operation and serialize its
//! result. Sessions are journaled by the store before a response is sent.

mod error;
mod routes;
mod state;

pub use error::ApiError;
pub use routes::{openapi_document, router, RouteSpec, ROUTES};
pub use state::{AppState, Indexed, JobState};
