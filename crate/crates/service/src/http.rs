//! HTTP transport: the message envelope at `/rpc` and resource routes
//! under `/v1` over the same methods.

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::protocol::{
    BestEffortParams, CancelParams, ConfigParams, ErrorPayload, EventsParams, ServiceError,
    SubmitParams, PROTOCOL_VERSION,
};
use crate::service::Service;

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/rpc", post(rpc))
        .route("/v1/health", get(health))
        .route("/v1/jobs", get(list_jobs).post(submit))
        .route("/v1/jobs/:id/events", get(events))
        .route("/v1/jobs/:id/cancel", post(cancel))
        .route("/v1/config", get(read_config).post(write_config))
        .route("/v1/best-effort", post(best_effort))
        .with_state(service)
}

/// Envelope errors travel in the body; the HTTP status stays 200.
async fn rpc(State(s): State<Service>, body: String) -> Json<crate::protocol::Response> {
    Json(s.handle_text(&body).await)
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok", "version": PROTOCOL_VERSION }))
}

struct ApiError(ServiceError);

impl IntoResponse for ApiError {
    fn into_response(self) -> HttpResponse {
        let status = match self.0 {
            ServiceError::BadRequest(_) | ServiceError::UnsupportedVersion(_) => {
                StatusCode::BAD_REQUEST
            }
            ServiceError::UnknownJob(_) | ServiceError::UnknownMethod(_) => StatusCode::NOT_FOUND,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(ErrorPayload::from(&self.0))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ApiError> {
    serde_json::from_str(text).map_err(|e| ApiError(ServiceError::BadRequest(format!("body: {e}"))))
}

async fn submit(
    State(s): State<Service>,
    text: String,
) -> ApiResult<crate::protocol::SubmitResult> {
    let p: SubmitParams = body(&text)?;
    s.submit(p).map(Json).map_err(ApiError)
}

async fn list_jobs(State(s): State<Service>) -> Json<Vec<crate::protocol::JobSummary>> {
    Json(s.jobs())
}

#[derive(Deserialize)]
struct EventsQuery {
    #[serde(default)]
    since: u64,
    #[serde(default)]
    wait_ms: u64,
}

async fn events(
    State(s): State<Service>,
    Path(job_id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> ApiResult<crate::protocol::EventsResult> {
    s.events(EventsParams {
        job_id,
        since: q.since,
        wait_ms: q.wait_ms,
    })
    .await
    .map(Json)
    .map_err(ApiError)
}

async fn cancel(
    State(s): State<Service>,
    Path(job_id): Path<String>,
) -> ApiResult<crate::protocol::CancelResult> {
    s.cancel(CancelParams { job_id })
        .map(Json)
        .map_err(ApiError)
}

async fn read_config(State(s): State<Service>) -> Json<crate::config::ServiceConfig> {
    Json(s.config())
}

async fn write_config(
    State(s): State<Service>,
    text: String,
) -> ApiResult<crate::config::ServiceConfig> {
    let set: Value = body(&text)?;
    s.configure(ConfigParams { set: Some(set) })
        .map(Json)
        .map_err(ApiError)
}

async fn best_effort(
    State(s): State<Service>,
    text: String,
) -> ApiResult<crate::protocol::BestEffortResult> {
    let p: BestEffortParams = body(&text)?;
    s.best_effort(p).map(Json).map_err(ApiError)
}
