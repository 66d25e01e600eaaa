//! HTTP client for the annotation service.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use annot_service::best_effort::BestEffort;
use annot_service::protocol::{
    BestEffortAttempt, BestEffortParams, CancelParams, CancelResult, ConfigParams, EventsParams,
    EventsResult, JobSummary, Request, Response, SubmitParams, SubmitResult,
};
use annot_service::{JobEvent, JobState, ServiceConfig, ServiceError};

pub const DEFAULT_SERVER: &str = "http://127.0.0.1:7878";

/// Long-poll bound used by [`Client::wait`].
pub const POLL_WAIT_MS: u64 = 1000;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("service at {url} is unreachable ({reason}); start it with `annot-service` or pass --server")]
    Unreachable { url: String, reason: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("{0}")]
    Service(#[from] ServiceError),
}

pub struct Client {
    http: reqwest::Client,
    base: String,
    next_id: AtomicU64,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: base.into().trim_end_matches('/').to_string(),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    /// One envelope round trip.
    pub async fn call<T: DeserializeOwned>(
        &self,
        method: &str,
        params: impl Serialize,
    ) -> Result<T, ClientError> {
        let req = Request::new(self.next_id.fetch_add(1, Ordering::SeqCst), method, params);
        let url = format!("{}/rpc", self.base);
        let resp = self.http.post(&url).json(&req).send().await.map_err(|e| {
            if e.is_connect() || e.is_timeout() {
                ClientError::Unreachable {
                    url: self.base.clone(),
                    reason: e.to_string(),
                }
            } else {
                ClientError::Transport(e.to_string())
            }
        })?;
        let resp: Response = resp
            .json()
            .await
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if resp.id != req.id {
            return Err(ClientError::Transport(format!(
                "response id {} for request {}",
                resp.id, req.id
            )));
        }
        Ok(resp.into_result()?)
    }

    pub async fn submit(&self, p: &SubmitParams) -> Result<String, ClientError> {
        Ok(self.call::<SubmitResult>("submit", p).await?.job_id)
    }

    pub async fn events(
        &self,
        job_id: &str,
        since: u64,
        wait_ms: u64,
    ) -> Result<EventsResult, ClientError> {
        let p = EventsParams {
            job_id: job_id.into(),
            since,
            wait_ms,
        };
        self.call("events", p).await
    }

    pub async fn cancel(&self, job_id: &str) -> Result<JobState, ClientError> {
        let p = CancelParams {
            job_id: job_id.into(),
        };
        Ok(self.call::<CancelResult>("cancel", p).await?.state)
    }

    pub async fn config(&self, set: Option<Value>) -> Result<ServiceConfig, ClientError> {
        self.call("config", ConfigParams { set }).await
    }

    pub async fn best_effort(
        &self,
        attempts: Vec<BestEffortAttempt>,
    ) -> Result<BestEffort, ClientError> {
        self.call("best_effort", BestEffortParams { attempts })
            .await
    }

    pub async fn jobs(&self) -> Result<Vec<JobSummary>, ClientError> {
        self.call("jobs", Value::Null).await
    }

    /// Polls until the job is terminal, handing each event to `on_event`
    /// exactly once and in order. The returned snapshot holds every event.
    pub async fn wait(
        &self,
        job_id: &str,
        mut on_event: impl FnMut(&JobEvent),
    ) -> Result<EventsResult, ClientError> {
        let mut events: Vec<JobEvent> = Vec::new();
        loop {
            let since = events.last().map(|e| e.ordinal).unwrap_or(0);
            let mut r = self.events(job_id, since, POLL_WAIT_MS).await?;
            for e in &r.events {
                on_event(e);
            }
            events.append(&mut r.events);
            if r.state.is_terminal() {
                r.events = events;
                return Ok(r);
            }
            if r.events.is_empty() {
                tokio::time::sleep(Duration::from_millis(10)).await;
            }
        }
    }
}

/// One progress line for people watching a job.
pub fn render_event(e: &JobEvent) -> String {
    let phase = e
        .phase
        .map(|p| {
            serde_json::to_value(p)
                .expect("phase serializes")
                .as_str()
                .unwrap_or_default()
                .to_string()
        })
        .unwrap_or_else(|| "state".into());
    let mut line = format!("[{}] {phase}: {}", e.ordinal, e.summary);
    if e.obligations_verified + e.obligations_failed > 0 {
        line.push_str(&format!(
            " ({} verified, {} failed)",
            e.obligations_verified, e.obligations_failed
        ));
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;
    use annot_service::Phase;

    #[test]
    fn events_render_their_counts_verbatim() {
        let e = JobEvent {
            ordinal: 4,
            state: JobState::Running,
            phase: Some(Phase::Verifying),
            attempt_index: 2,
            summary: "attempt 2: Success from alpha".into(),
            obligations_verified: 7,
            obligations_failed: 0,
        };
        assert_eq!(
            render_event(&e),
            "[4] verifying: attempt 2: Success from alpha (7 verified, 0 failed)"
        );
        let s = JobEvent {
            phase: None,
            summary: "done".into(),
            obligations_verified: 0,
            ..e
        };
        assert_eq!(render_event(&s), "[4] state: done");
    }

    #[test]
    fn base_url_loses_trailing_slashes() {
        assert_eq!(Client::new("http://h:1//").base(), "http://h:1");
    }
}
