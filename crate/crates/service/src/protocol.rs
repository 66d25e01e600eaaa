//! Wire protocol: one JSON request and one JSON response per message.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use annot_core::verifier::VerificationOutcome;

use crate::best_effort::BestEffort;
use crate::jobs::{JobEvent, JobKind, JobState};

/// Requests carrying any other version are refused.
pub const PROTOCOL_VERSION: u32 = 1;

/// Every method the dispatcher understands.
pub const METHODS: [&str; 6] = [
    "submit",
    "events",
    "cancel",
    "config",
    "best_effort",
    "jobs",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub version: u32,
    /// Echoed back verbatim; the client's correlation token.
    pub id: Value,
    pub method: String,
    #[serde(default)]
    pub params: Value,
}

impl Request {
    pub fn new(id: impl Into<Value>, method: &str, params: impl Serialize) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            id: id.into(),
            method: method.into(),
            params: serde_json::to_value(params).expect("params serialize"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub version: u32,
    pub id: Value,
    pub status: Status,
    /// The method result, or an [`ErrorPayload`].
    pub payload: Value,
}

impl Response {
    pub fn ok(id: Value, payload: impl Serialize) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            id,
            status: Status::Ok,
            payload: serde_json::to_value(payload).expect("payload serialize"),
        }
    }

    pub fn error(id: Value, err: &ServiceError) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            id,
            status: Status::Error,
            payload: serde_json::to_value(ErrorPayload::from(err)).expect("error serialize"),
        }
    }

    /// The payload as `T`, or the service error it carries.
    pub fn into_result<T: serde::de::DeserializeOwned>(self) -> Result<T, ServiceError> {
        match self.status {
            Status::Ok => serde_json::from_value(self.payload)
                .map_err(|e| ServiceError::Internal(e.to_string())),
            Status::Error => {
                let p: ErrorPayload = serde_json::from_value(self.payload)
                    .map_err(|e| ServiceError::Internal(e.to_string()))?;
                Err(p.into())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ServiceError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("unknown method {0}")]
    UnknownMethod(String),
    #[error("unsupported protocol version {0}; expected {PROTOCOL_VERSION}")]
    UnsupportedVersion(u32),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::UnknownJob(_) => "unknown_job",
            ServiceError::UnknownMethod(_) => "unknown_method",
            ServiceError::UnsupportedVersion(_) => "unsupported_version",
            ServiceError::Internal(_) => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
}

impl From<&ServiceError> for ErrorPayload {
    fn from(e: &ServiceError) -> Self {
        let message = match e {
            ServiceError::BadRequest(m) | ServiceError::Internal(m) => m.clone(),
            ServiceError::UnknownJob(j) => j.clone(),
            ServiceError::UnknownMethod(m) => m.clone(),
            ServiceError::UnsupportedVersion(v) => v.to_string(),
        };
        Self {
            code: e.code().into(),
            message,
        }
    }
}

impl From<ErrorPayload> for ServiceError {
    fn from(p: ErrorPayload) -> Self {
        match p.code.as_str() {
            "bad_request" => ServiceError::BadRequest(p.message),
            "unknown_job" => ServiceError::UnknownJob(p.message),
            "unknown_method" => ServiceError::UnknownMethod(p.message),
            "unsupported_version" => {
                ServiceError::UnsupportedVersion(p.message.parse().unwrap_or(0))
            }
            _ => ServiceError::Internal(p.message),
        }
    }
}

/// Inclusive 1-based line range of the editor selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSpan {
    pub start_line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitParams {
    /// Kept untyped so an unknown kind is a bad request, not a parse error.
    pub kind: String,
    pub program_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_span: Option<LineSpan>,
    /// Minimize only: the program the annotations were added to; defaults
    /// to the stripped buffer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_text: Option<String>,
    /// Run configuration keys, plus `retry_limit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_overrides: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitResult {
    pub job_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventsParams {
    pub job_id: String,
    /// Only events with a larger ordinal are returned.
    #[serde(default)]
    pub since: u64,
    /// Long-poll: wait up to this long for a new event.
    #[serde(default)]
    pub wait_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsResult {
    pub job_id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub events: Vec<JobEvent>,
    /// Present once the job is done.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    /// Present once the job failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CancelParams {
    pub job_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CancelResult {
    pub job_id: String,
    pub state: JobState,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigParams {
    /// Keys merged into the service configuration; absent to read it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestEffortAttempt {
    pub program: String,
    pub outcome: VerificationOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestEffortParams {
    pub attempts: Vec<BestEffortAttempt>,
}

pub type BestEffortResult = BestEffort;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSummary {
    pub job_id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub events: usize,
}
