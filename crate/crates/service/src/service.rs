//! Method dispatch shared by every transport.

use serde::de::DeserializeOwned;
use serde_json::Value;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use annot_core::verifier::Verifier;

use crate::best_effort;
use crate::config::ServiceConfig;
use crate::jobs::{JobKind, JobManager, JobSpec};
use crate::protocol::{
    BestEffortParams, BestEffortResult, CancelParams, CancelResult, ConfigParams, EventsParams,
    EventsResult, JobSummary, Request, Response, ServiceError, SubmitParams, SubmitResult,
    PROTOCOL_VERSION,
};

/// Cheap to clone; clones share jobs and configuration.
#[derive(Clone)]
pub struct Service {
    jobs: JobManager,
    config: Arc<RwLock<ServiceConfig>>,
}

impl Service {
    pub fn new(config: ServiceConfig, verifier: Arc<dyn Verifier>) -> Result<Self, String> {
        config.validate()?;
        Ok(Self {
            jobs: JobManager::new(verifier, config.max_concurrent_jobs),
            config: Arc::new(RwLock::new(config)),
        })
    }

    pub fn config(&self) -> ServiceConfig {
        self.config.read().expect("config poisoned").clone()
    }

    pub fn submit(&self, p: SubmitParams) -> Result<SubmitResult, ServiceError> {
        let kind: JobKind = p.kind.parse()?;
        if p.program_text.trim().is_empty() {
            return Err(ServiceError::BadRequest("program_text is empty".into()));
        }
        if let Some(s) = p.selection_span {
            if s.start_line == 0 || s.end_line < s.start_line {
                return Err(ServiceError::BadRequest(format!(
                    "selection_span {}..{} is not a 1-based line range",
                    s.start_line, s.end_line
                )));
            }
        }
        let cfg = self.config();
        let run = cfg.job_config(p.config_overrides.as_ref())?;
        let job_id = self.jobs.submit(JobSpec {
            kind,
            program_text: p.program_text,
            selection: p.selection_span,
            original_text: p.original_text,
            run,
            replay_dir: cfg.replay_dir,
            artifacts_dir: cfg.artifacts_dir,
        })?;
        Ok(SubmitResult { job_id })
    }

    pub async fn events(&self, p: EventsParams) -> Result<EventsResult, ServiceError> {
        self.jobs
            .events(&p.job_id, p.since, Duration::from_millis(p.wait_ms))
            .await
    }

    pub fn cancel(&self, p: CancelParams) -> Result<CancelResult, ServiceError> {
        let state = self.jobs.cancel(&p.job_id)?;
        Ok(CancelResult {
            job_id: p.job_id,
            state,
        })
    }

    pub fn configure(&self, p: ConfigParams) -> Result<ServiceConfig, ServiceError> {
        let mut cfg = self.config.write().expect("config poisoned");
        if let Some(set) = &p.set {
            *cfg = cfg.updated(set)?;
        }
        Ok(cfg.clone())
    }

    pub fn best_effort(&self, p: BestEffortParams) -> Result<BestEffortResult, ServiceError> {
        let attempts: Vec<_> = p
            .attempts
            .into_iter()
            .map(|a| (a.program, a.outcome))
            .collect();
        let budget = self.config().run.diagnostics_budget;
        best_effort::choose(&best_effort::from_outcomes(&attempts), budget)
            .ok_or_else(|| ServiceError::BadRequest("at least one attempt is required".into()))
    }

    pub fn jobs(&self) -> Vec<JobSummary> {
        self.jobs.list()
    }

    pub async fn handle(&self, req: Request) -> Response {
        let id = req.id.clone();
        match self.dispatch(req).await {
            Ok(payload) => Response::ok(id, payload),
            Err(e) => Response::error(id, &e),
        }
    }

    /// One message of the line transport; a malformed line is answered
    /// with a null id.
    pub async fn handle_text(&self, text: &str) -> Response {
        match serde_json::from_str::<Request>(text) {
            Ok(req) => self.handle(req).await,
            Err(e) => {
                let id = serde_json::from_str::<Value>(text)
                    .ok()
                    .and_then(|v| v.get("id").cloned())
                    .unwrap_or(Value::Null);
                Response::error(
                    id,
                    &ServiceError::BadRequest(format!("malformed request: {e}")),
                )
            }
        }
    }

    async fn dispatch(&self, req: Request) -> Result<Value, ServiceError> {
        if req.version != PROTOCOL_VERSION {
            return Err(ServiceError::UnsupportedVersion(req.version));
        }
        let params = req.params;
        match req.method.as_str() {
            "submit" => to_value(self.submit(parse(params)?)),
            "events" => to_value(self.events(parse(params)?).await),
            "cancel" => to_value(self.cancel(parse(params)?)),
            "config" => to_value(self.configure(parse_or_default(params)?)),
            "best_effort" => to_value(self.best_effort(parse(params)?)),
            "jobs" => to_value(Ok(self.jobs())),
            other => Err(ServiceError::UnknownMethod(other.to_string())),
        }
    }
}

fn parse<T: DeserializeOwned>(params: Value) -> Result<T, ServiceError> {
    serde_json::from_value(params).map_err(|e| ServiceError::BadRequest(format!("params: {e}")))
}

fn parse_or_default<T: DeserializeOwned + Default>(params: Value) -> Result<T, ServiceError> {
    if params.is_null() {
        Ok(T::default())
    } else {
        parse(params)
    }
}

fn to_value<T: serde::Serialize>(r: Result<T, ServiceError>) -> Result<Value, ServiceError> {
    r.map(|v| serde_json::to_value(v).expect("payload serializes"))
}
