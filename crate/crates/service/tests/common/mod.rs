#![allow(dead_code)]

use async_trait::async_trait;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use annot_core::llm::ProviderConfig;
use annot_core::repair_loop::Strategy;
use annot_core::verifier::{MockSpec, MockVerifier, VerificationOutcome, Verifier, VerifierConfig};
use annot_service::protocol::{EventsParams, EventsResult};
use annot_service::{JobState, Service, ServiceConfig};

pub fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn sample(name: &str) -> String {
    std::fs::read_to_string(data().join("sample/programs").join(format!("{name}.dfy"))).unwrap()
}

pub fn bench_verifier() -> Arc<dyn Verifier> {
    let spec: MockSpec =
        serde_json::from_str(&std::fs::read_to_string(data().join("bench/verifier.json")).unwrap())
            .unwrap();
    Arc::new(MockVerifier::from_spec(spec))
}

/// Repair strategy against the recorded `alpha` completions.
pub fn replay_config() -> ServiceConfig {
    let mut cfg = ServiceConfig::default();
    cfg.run.strategy = Strategy::Repair;
    cfg.run.providers = vec![ProviderConfig {
        model_id: "alpha-1".into(),
        ..ProviderConfig::named("alpha", 1)
    }];
    cfg.replay_dir = Some(data().join("bench/replay"));
    cfg
}

pub fn service(cfg: ServiceConfig, verifier: Arc<dyn Verifier>) -> Service {
    Service::new(cfg, verifier).unwrap()
}

/// Polls until the job is terminal, returning the full history.
pub async fn wait(s: &Service, job_id: &str) -> EventsResult {
    let mut all = Vec::new();
    let deadline = tokio::time::Instant::now() + Duration::from_secs(20);
    loop {
        let since = all
            .last()
            .map(|e: &annot_service::JobEvent| e.ordinal)
            .unwrap_or(0);
        let mut r = s
            .events(EventsParams {
                job_id: job_id.into(),
                since,
                wait_ms: 200,
            })
            .await
            .unwrap();
        all.append(&mut r.events);
        if r.state.is_terminal() {
            r.events = all;
            return r;
        }
        assert!(
            tokio::time::Instant::now() < deadline,
            "job {job_id} did not finish"
        );
    }
}

/// Ordinals are 1..=n and the state sequence replays to the final state.
pub fn check_history(r: &EventsResult) {
    let ords: Vec<u64> = r.events.iter().map(|e| e.ordinal).collect();
    assert_eq!(ords, (1..=ords.len() as u64).collect::<Vec<_>>());
    let mut state = JobState::Queued;
    assert_eq!(r.events[0].state, JobState::Queued);
    for e in &r.events[1..] {
        if e.state != state {
            assert!(state.can_become(e.state), "{state:?} -> {:?}", e.state);
            state = e.state;
        }
    }
    assert_eq!(state, r.state);
}

/// Waits on a gate before answering, so jobs can be held mid-run.
pub struct GatedVerifier {
    pub gate: Arc<tokio::sync::Semaphore>,
    pub outcome: VerificationOutcome,
}

impl GatedVerifier {
    pub fn closed() -> (Arc<Self>, Arc<tokio::sync::Semaphore>) {
        let gate = Arc::new(tokio::sync::Semaphore::new(0));
        (
            Arc::new(Self {
                gate: gate.clone(),
                outcome: VerificationOutcome::success(1),
            }),
            gate,
        )
    }
}

#[async_trait]
impl Verifier for GatedVerifier {
    async fn verify(&self, _text: &str, _cfg: &VerifierConfig) -> VerificationOutcome {
        let _p = self.gate.acquire().await.unwrap();
        self.outcome.clone()
    }
}
