//! Provider fan-out: sequential failover, concurrent multimodel calls,
//! arbitration between candidates, and cost accounting.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::http::HttpProvider;
use super::prompt::{
    render_direct_prompt, render_repair_prompt, Message, PromptError, PromptKind, PromptTemplate,
};
use super::provider::{validate_providers, Provider, ProviderConfig, ProviderError, ProviderKind};
use super::replay::ReplayProvider;
use crate::source::{count_loc, parse};
use crate::strip_merge::extract_code_block;
use crate::verifier::{VerificationOutcome, VerificationStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt_kind: PromptKind,
    pub program_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier_errors: Option<String>,
}

impl GenerationRequest {
    pub fn direct(program: impl Into<String>) -> Self {
        Self {
            prompt_kind: PromptKind::Direct,
            program_text: program.into(),
            verifier_errors: None,
        }
    }

    pub fn repair(program: impl Into<String>, errors: impl Into<String>) -> Self {
        Self {
            prompt_kind: PromptKind::Repair,
            program_text: program.into(),
            verifier_errors: Some(errors.into()),
        }
    }

    pub fn messages(&self) -> Result<Vec<Message>, PromptError> {
        match self.prompt_kind {
            PromptKind::Direct => Ok(render_direct_prompt(&self.program_text)),
            PromptKind::Repair => render_repair_prompt(
                &self.program_text,
                self.verifier_errors.as_deref().unwrap_or(""),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub provider: String,
    pub priority: u32,
    pub prompt: String,
    pub raw_text: String,
    pub extracted_program: Option<String>,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost: f64,
    pub latency_s: f64,
}

/// One provider call, successful or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub provider: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost: f64,
    pub latency_s: f64,
}

#[derive(Debug, Default)]
pub struct CostLedger {
    entries: Mutex<Vec<AttemptLog>>,
}

impl CostLedger {
    pub fn record(&self, entry: AttemptLog) {
        self.entries.lock().unwrap().push(entry);
    }

    pub fn entries(&self) -> Vec<AttemptLog> {
        self.entries.lock().unwrap().clone()
    }

    pub fn total_cost(&self) -> f64 {
        self.entries.lock().unwrap().iter().map(|e| e.cost).sum()
    }

    pub fn total_latency(&self) -> f64 {
        self.entries
            .lock()
            .unwrap()
            .iter()
            .map(|e| e.latency_s)
            .sum()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderFailure {
    pub provider: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("no providers configured")]
    NoProviders,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("all providers failed: {}", .0.iter().map(|f| format!("{}: {}", f.provider, f.reason)).collect::<Vec<_>>().join("; "))]
    AllProvidersFailed(Vec<ProviderFailure>),
    #[error("provider configuration: {0}")]
    Config(String),
}

#[derive(Clone)]
pub struct Endpoint {
    pub config: ProviderConfig,
    pub provider: Arc<dyn Provider>,
}

/// Providers ordered by priority plus the run's cost ledger.
#[derive(Clone)]
pub struct Gateway {
    endpoints: Vec<Endpoint>,
    ledger: Arc<CostLedger>,
}

impl Gateway {
    pub fn new(mut endpoints: Vec<Endpoint>) -> Result<Self, GatewayError> {
        let configs: Vec<ProviderConfig> = endpoints.iter().map(|e| e.config.clone()).collect();
        validate_providers(&configs).map_err(GatewayError::Config)?;
        endpoints.sort_by_key(|e| e.config.priority);
        Ok(Self {
            endpoints,
            ledger: Arc::new(CostLedger::default()),
        })
    }

    /// All configs share one provider implementation.
    pub fn uniform(
        configs: Vec<ProviderConfig>,
        provider: Arc<dyn Provider>,
    ) -> Result<Self, GatewayError> {
        Self::new(
            configs
                .into_iter()
                .map(|config| Endpoint {
                    config,
                    provider: provider.clone(),
                })
                .collect(),
        )
    }

    /// With a replay path every provider is served from it; otherwise
    /// providers are reached over HTTPS by kind.
    pub fn from_configs(
        configs: Vec<ProviderConfig>,
        replay: Option<&Path>,
    ) -> Result<Self, GatewayError> {
        if let Some(path) = replay {
            let r = ReplayProvider::load(path).map_err(|e| GatewayError::Config(e.to_string()))?;
            return Self::uniform(configs, Arc::new(r));
        }
        if let Some(c) = configs.iter().find(|c| c.kind == ProviderKind::Replay) {
            return Err(GatewayError::Config(format!(
                "provider {} needs a replay path",
                c.name
            )));
        }
        Self::uniform(configs, Arc::new(HttpProvider::new()))
    }

    pub fn with_ledger(mut self, ledger: Arc<CostLedger>) -> Self {
        self.ledger = ledger;
        self
    }

    pub fn ledger(&self) -> &Arc<CostLedger> {
        &self.ledger
    }

    pub fn providers(&self) -> impl Iterator<Item = &ProviderConfig> {
        self.endpoints.iter().map(|e| &e.config)
    }

    async fn call_one(
        &self,
        ep: &Endpoint,
        messages: &[Message],
        pin: &str,
    ) -> Result<GenerationResult, ProviderFailure> {
        let cfg = &ep.config;
        let started = Instant::now();
        let limit = Duration::from_secs_f64(cfg.timeout_s);
        let reply = match tokio::time::timeout(limit, ep.provider.complete(cfg, messages)).await {
            Ok(r) => r,
            Err(_) => Err(ProviderError::Timeout),
        };
        let measured = started.elapsed().as_secs_f64();
        match reply {
            Err(e) => {
                self.ledger.record(AttemptLog {
                    provider: cfg.name.clone(),
                    failure: Some(e.to_string()),
                    input_tokens: 0,
                    output_tokens: 0,
                    cost: 0.0,
                    latency_s: measured,
                });
                Err(ProviderFailure {
                    provider: cfg.name.clone(),
                    reason: e.to_string(),
                })
            }
            Ok(c) => {
                let extracted = extract_code_block(&c.text).ok();
                let result = GenerationResult {
                    provider: cfg.name.clone(),
                    priority: cfg.priority,
                    prompt: pin.to_string(),
                    cost: cfg.cost(c.input_tokens, c.output_tokens),
                    latency_s: c.latency_s.unwrap_or(measured),
                    input_tokens: c.input_tokens,
                    output_tokens: c.output_tokens,
                    extracted_program: extracted,
                    raw_text: c.text,
                };
                self.ledger.record(AttemptLog {
                    provider: cfg.name.clone(),
                    failure: result
                        .extracted_program
                        .is_none()
                        .then(|| "no code block in response".to_string()),
                    input_tokens: result.input_tokens,
                    output_tokens: result.output_tokens,
                    cost: result.cost,
                    latency_s: result.latency_s,
                });
                Ok(result)
            }
        }
    }

    /// Tries providers in priority order until one yields a program.
    pub async fn call_with_failover(
        &self,
        req: &GenerationRequest,
    ) -> Result<GenerationResult, GatewayError> {
        if self.endpoints.is_empty() {
            return Err(GatewayError::NoProviders);
        }
        let messages = req.messages()?;
        let pin = PromptTemplate::for_kind(req.prompt_kind).pin();
        let mut failures = Vec::new();
        for ep in &self.endpoints {
            match self.call_one(ep, &messages, &pin).await {
                Ok(r) if r.extracted_program.is_some() => return Ok(r),
                Ok(r) => failures.push(ProviderFailure {
                    provider: r.provider,
                    reason: "no code block in response".into(),
                }),
                Err(f) => failures.push(f),
            }
        }
        Err(GatewayError::AllProvidersFailed(failures))
    }

    /// Calls every provider concurrently; results follow priority order.
    pub async fn call_all(
        &self,
        req: &GenerationRequest,
    ) -> Result<Vec<Result<GenerationResult, ProviderFailure>>, GatewayError> {
        if self.endpoints.is_empty() {
            return Err(GatewayError::NoProviders);
        }
        let messages = req.messages()?;
        let pin = PromptTemplate::for_kind(req.prompt_kind).pin();
        Ok(futures::future::join_all(
            self.endpoints
                .iter()
                .map(|ep| self.call_one(ep, &messages, &pin)),
        )
        .await)
    }
}

struct Rank {
    valid: bool,
    success: bool,
    loc: usize,
    elapsed: f64,
    priority: u32,
}

fn rank(r: &GenerationResult, o: &VerificationOutcome) -> Rank {
    let loc = r
        .extracted_program
        .as_deref()
        .map_or(usize::MAX, |p| count_loc(&parse(p)).total());
    Rank {
        valid: r.extracted_program.is_some() && o.status != VerificationStatus::SyntaxError,
        success: o.status == VerificationStatus::Success,
        loc,
        elapsed: o.elapsed_s,
        priority: r.priority,
    }
}

fn better(a: &Rank, b: &Rank) -> Ordering {
    b.valid
        .cmp(&a.valid)
        .then(b.success.cmp(&a.success))
        .then(a.loc.cmp(&b.loc))
        .then(a.elapsed.total_cmp(&b.elapsed))
        .then(a.priority.cmp(&b.priority))
}

/// Index of the preferred candidate: syntactically valid, then verified,
/// then fewer lines, then faster verification, then provider priority.
pub fn arbitrate(results: &[(GenerationResult, VerificationOutcome)]) -> Option<usize> {
    let ranks: Vec<Rank> = results.iter().map(|(r, o)| rank(r, o)).collect();
    (0..results.len()).min_by(|&i, &j| {
        better(&ranks[i], &ranks[j])
            .then_with(|| results[i].0.provider.cmp(&results[j].0.provider))
            .then_with(|| results[i].0.raw_text.cmp(&results[j].0.raw_text))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::provider::Completion;
    use crate::llm::replay::ScriptedProvider;

    fn ep(name: &str, prio: u32, p: Arc<dyn Provider>) -> Endpoint {
        Endpoint {
            config: ProviderConfig {
                cost_per_input_token: 0.001,
                cost_per_output_token: 0.002,
                ..ProviderConfig::named(name, prio)
            },
            provider: p,
        }
    }

    fn block(p: &str) -> Result<Completion, ProviderError> {
        Ok(Completion::text(format!("BEGIN DAFNY\n{p}\nEND DAFNY")).with_usage(10, 20))
    }

    #[tokio::test]
    async fn first_valid_provider_wins() {
        let a = Arc::new(ScriptedProvider::new([block("method A() {}")]));
        let b = Arc::new(ScriptedProvider::new([block("method B() {}")]));
        let g = Gateway::new(vec![ep("b", 2, b.clone()), ep("a", 1, a.clone())]).unwrap();
        let r = g
            .call_with_failover(&GenerationRequest::direct("x"))
            .await
            .unwrap();
        assert_eq!(r.provider, "a");
        assert_eq!(b.calls(), 0);
        assert!((r.cost - 0.05).abs() < 1e-12);
    }

    #[tokio::test]
    async fn rate_limit_and_missing_block_fail_over() {
        let a = Arc::new(ScriptedProvider::new([Err(ProviderError::RateLimited(
            "429".into(),
        ))]));
        let b = Arc::new(ScriptedProvider::new([Ok(Completion::text(
            "sorry, no code",
        ))]));
        let c = Arc::new(ScriptedProvider::new([block("method C() {}")]));
        let g = Gateway::new(vec![ep("a", 1, a), ep("b", 2, b), ep("c", 3, c)]).unwrap();
        let r = g
            .call_with_failover(&GenerationRequest::direct("x"))
            .await
            .unwrap();
        assert_eq!(r.provider, "c");
        let log = g.ledger().entries();
        assert_eq!(log.len(), 3);
        assert!(log[0].failure.as_deref().unwrap().contains("rate limited"));
        assert!(log[1].failure.is_some() && log[2].failure.is_none());
    }

    #[tokio::test]
    async fn all_failing_reports_each_provider() {
        let a = Arc::new(ScriptedProvider::new([Err(ProviderError::Transport(
            "down".into(),
        ))]));
        let b = Arc::new(ScriptedProvider::new([]));
        let g = Gateway::new(vec![ep("a", 1, a), ep("b", 2, b)]).unwrap();
        match g.call_with_failover(&GenerationRequest::direct("x")).await {
            Err(GatewayError::AllProvidersFailed(f)) => {
                assert_eq!(
                    f.iter().map(|f| f.provider.as_str()).collect::<Vec<_>>(),
                    ["a", "b"]
                )
            }
            other => panic!("unexpected {other:?}"),
        }
        let empty = Gateway::new(vec![]).unwrap();
        assert_eq!(
            empty
                .call_with_failover(&GenerationRequest::direct("x"))
                .await,
            Err(GatewayError::NoProviders)
        );
    }

    #[tokio::test]
    async fn slow_provider_times_out() {
        struct Slow;
        #[async_trait::async_trait]
        impl Provider for Slow {
            async fn complete(
                &self,
                _: &ProviderConfig,
                _: &[Message],
            ) -> Result<Completion, ProviderError> {
                tokio::time::sleep(Duration::from_secs(10)).await;
                unreachable!()
            }
        }
        let mut slow = ep("slow", 1, Arc::new(Slow));
        slow.config.timeout_s = 0.05;
        let b = Arc::new(ScriptedProvider::new([block("method B() {}")]));
        let g = Gateway::new(vec![slow, ep("b", 2, b)]).unwrap();
        let r = g
            .call_with_failover(&GenerationRequest::direct("x"))
            .await
            .unwrap();
        assert_eq!(r.provider, "b");
        assert_eq!(
            g.ledger().entries()[0].failure.as_deref(),
            Some("timed out")
        );
    }

    #[tokio::test]
    async fn multimodel_cost_sums_attempts() {
        let a = Arc::new(ScriptedProvider::new([block("method A() {}")]));
        let b = Arc::new(ScriptedProvider::new([Err(ProviderError::Timeout)]));
        let c = Arc::new(ScriptedProvider::new([block("method C() {}")]));
        let g = Gateway::new(vec![ep("a", 1, a), ep("b", 2, b), ep("c", 3, c)]).unwrap();
        let all = g.call_all(&GenerationRequest::direct("x")).await.unwrap();
        assert_eq!(all.len(), 3);
        let sum: f64 = all
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|r| r.cost)
            .sum();
        assert!((sum - g.ledger().total_cost()).abs() < 1e-12);
    }

    #[test]
    fn repair_request_needs_errors() {
        let mut r = GenerationRequest::repair("p", "");
        assert_eq!(r.messages(), Err(PromptError::EmptyErrors));
        r.verifier_errors = Some("program.dfy(1,1): Error: x".into());
        assert!(r.messages().is_ok());
    }
}
