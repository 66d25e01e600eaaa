//! In-process verifiers for tests and offline runs.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::{VerificationOutcome, Verifier, VerifierConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockRule {
    Contains(String),
    NotContains(String),
    /// Hex sha256 of the exact program text.
    Fingerprint(String),
    /// Regular expression; an invalid pattern never matches.
    Matches(String),
}

impl MockRule {
    fn matches(&self, text: &str) -> bool {
        match self {
            MockRule::Contains(s) => text.contains(s.as_str()),
            MockRule::NotContains(s) => !text.contains(s.as_str()),
            MockRule::Fingerprint(h) => fingerprint(text) == *h,
            MockRule::Matches(p) => regex::Regex::new(p).is_ok_and(|r| r.is_match(text)),
        }
    }
}

pub fn fingerprint(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Serializable description of a [`MockVerifier`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockSpec {
    pub default: VerificationOutcome,
    #[serde(default)]
    pub rules: Vec<(MockRule, VerificationOutcome)>,
}

/// First matching rule wins; otherwise the default outcome.
#[derive(Debug, Clone)]
pub struct MockVerifier {
    spec: MockSpec,
    calls: Arc<AtomicUsize>,
}

impl MockVerifier {
    pub fn new(default: VerificationOutcome) -> Self {
        Self::from_spec(MockSpec {
            default,
            rules: Vec::new(),
        })
    }

    pub fn from_spec(spec: MockSpec) -> Self {
        Self {
            spec,
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn rule(mut self, rule: MockRule, outcome: VerificationOutcome) -> Self {
        self.spec.rules.push((rule, outcome));
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl Verifier for MockVerifier {
    async fn verify(&self, text: &str, _cfg: &VerifierConfig) -> VerificationOutcome {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.spec
            .rules
            .iter()
            .find(|(r, _)| r.matches(text))
            .map(|(_, o)| o.clone())
            .unwrap_or_else(|| self.spec.default.clone())
    }
}

/// Verifier backed by a closure over the program text and config.
pub struct FnVerifier<F> {
    f: F,
    calls: AtomicUsize,
}

impl<F> FnVerifier<F>
where
    F: Fn(&str, &VerifierConfig) -> VerificationOutcome + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self {
            f,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl<F> Verifier for FnVerifier<F>
where
    F: Fn(&str, &VerifierConfig) -> VerificationOutcome + Send + Sync,
{
    async fn verify(&self, text: &str, cfg: &VerifierConfig) -> VerificationOutcome {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.f)(text, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::VerificationStatus;

    #[tokio::test]
    async fn first_matching_rule_wins() {
        let v = MockVerifier::new(VerificationOutcome::timeout())
            .rule(
                MockRule::Contains("assume".into()),
                VerificationOutcome::syntax_error("no"),
            )
            .rule(
                MockRule::NotContains("ensures".into()),
                VerificationOutcome::success(1),
            )
            .rule(
                MockRule::Fingerprint(fingerprint("x ensures")),
                VerificationOutcome::failure(0, vec![]),
            );
        let cfg = VerifierConfig::default();
        assert_eq!(
            v.verify("assume x", &cfg).await.status,
            VerificationStatus::SyntaxError
        );
        assert_eq!(
            v.verify("plain", &cfg).await.status,
            VerificationStatus::Success
        );
        assert_eq!(
            v.verify("x ensures", &cfg).await.status,
            VerificationStatus::VerificationFailure
        );
        assert_eq!(
            v.verify("y ensures", &cfg).await.status,
            VerificationStatus::Timeout
        );
        assert_eq!(v.calls(), 4);
    }

    #[tokio::test]
    async fn regex_rule() {
        let v = MockVerifier::new(VerificationOutcome::success(1)).rule(
            MockRule::Matches(r"(?m)^[ \t]*[^/ \t][^\n]*//@invalid".into()),
            VerificationOutcome::failure(0, vec![]),
        );
        let cfg = VerifierConfig::default();
        assert!(v
            .verify("  // assert x; //@invalid\n", &cfg)
            .await
            .is_success());
        assert!(!v
            .verify("  assert x; //@invalid\n", &cfg)
            .await
            .is_success());
        let bad = MockVerifier::new(VerificationOutcome::success(1)).rule(
            MockRule::Matches("(".into()),
            VerificationOutcome::timeout(),
        );
        assert!(bad.verify("(", &cfg).await.is_success());
    }

    #[test]
    fn spec_round_trips_json() {
        let spec = MockSpec {
            default: VerificationOutcome::success(2),
            rules: vec![(
                MockRule::Contains("a".into()),
                VerificationOutcome::timeout(),
            )],
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<MockSpec>(&json).unwrap(), spec);
    }
}
