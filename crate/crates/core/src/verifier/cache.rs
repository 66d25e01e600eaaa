//! Persistent memoization of verifier outcomes in a JSONL file.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use tokio::sync::Mutex;

use super::{VerificationOutcome, VerificationStatus, Verifier, VerifierConfig};

/// Trailing whitespace and blank-line runs do not affect the key.
pub fn normalize_for_cache(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// The executable is not part of the key: outcomes are assumed to be a
/// function of the program and the verification options only.
pub fn cache_key(text: &str, cfg: &VerifierConfig) -> String {
    let material = serde_json::json!([
        normalize_for_cache(text),
        cfg.extra_args,
        cfg.filter_symbol,
        cfg.timeout_s,
    ]);
    hex::encode(Sha256::digest(material.to_string().as_bytes()))
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    outcome: VerificationOutcome,
}

struct State {
    entries: HashMap<String, VerificationOutcome>,
    hits: usize,
    misses: usize,
}

pub struct CachedVerifier<V> {
    inner: V,
    path: Option<PathBuf>,
    state: Mutex<State>,
}

impl<V: Verifier> CachedVerifier<V> {
    pub fn in_memory(inner: V) -> Self {
        Self {
            inner,
            path: None,
            state: Mutex::new(State {
                entries: HashMap::new(),
                hits: 0,
                misses: 0,
            }),
        }
    }

    /// Loads existing entries; unreadable lines are skipped.
    pub fn open(inner: V, path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                for line in text.lines() {
                    match serde_json::from_str::<Entry>(line) {
                        Ok(e) => {
                            entries.insert(e.key, e.outcome);
                        }
                        Err(err) if !line.trim().is_empty() => {
                            tracing::warn!(path = %path.display(), %err, "skipping corrupt cache line");
                        }
                        Err(_) => {}
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
        Ok(Self {
            inner,
            path: Some(path),
            state: Mutex::new(State {
                entries,
                hits: 0,
                misses: 0,
            }),
        })
    }

    pub fn inner(&self) -> &V {
        &self.inner
    }

    /// (hits, misses) since construction.
    pub async fn stats(&self) -> (usize, usize) {
        let s = self.state.lock().await;
        (s.hits, s.misses)
    }

    pub async fn len(&self) -> usize {
        self.state.lock().await.entries.len()
    }

    pub async fn is_empty(&self) -> bool {
        self.len().await == 0
    }
}

#[async_trait]
impl<V: Verifier> Verifier for CachedVerifier<V> {
    async fn verify(&self, text: &str, cfg: &VerifierConfig) -> VerificationOutcome {
        let key = cache_key(text, cfg);
        {
            let mut s = self.state.lock().await;
            if let Some(o) = s.entries.get(&key).cloned() {
                s.hits += 1;
                return VerificationOutcome { cached: true, ..o };
            }
            s.misses += 1;
        }
        let outcome = self.inner.verify(text, cfg).await;
        if outcome.status == VerificationStatus::ToolError {
            return outcome;
        }
        let mut s = self.state.lock().await;
        let stored = VerificationOutcome {
            cached: false,
            ..outcome.clone()
        };
        if let Some(path) = &self.path {
            let line = serde_json::to_string(&Entry {
                key: key.clone(),
                outcome: stored.clone(),
            })
            .expect("outcome serializes");
            let written = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .and_then(|mut f| writeln!(f, "{line}"));
            if let Err(err) = written {
                tracing::warn!(path = %path.display(), %err, "cache write failed");
            }
        }
        s.entries.insert(key, stored);
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::MockVerifier;

    #[tokio::test]
    async fn hit_after_miss_and_whitespace_insensitive() {
        let v = CachedVerifier::in_memory(MockVerifier::new(VerificationOutcome::success(1)));
        let cfg = VerifierConfig::default();
        assert!(!v.verify("method M() {}", &cfg).await.cached);
        assert!(v.verify("method M() {}   \n\n", &cfg).await.cached);
        assert_eq!(v.inner().calls(), 1);
        let filtered = cfg.clone().with_filter(Some("M".into()));
        assert!(!v.verify("method M() {}", &filtered).await.cached);
        assert_eq!(v.stats().await, (1, 2));
    }

    #[tokio::test]
    async fn tool_errors_are_not_cached() {
        let v = CachedVerifier::in_memory(MockVerifier::new(VerificationOutcome::tool_error("x")));
        let cfg = VerifierConfig::default();
        v.verify("a", &cfg).await;
        v.verify("a", &cfg).await;
        assert_eq!(v.inner().calls(), 2);
    }

    #[tokio::test]
    async fn persists_and_skips_corrupt_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let cfg = VerifierConfig::default();
        {
            let v = CachedVerifier::open(MockVerifier::new(VerificationOutcome::success(3)), &path)
                .unwrap();
            v.verify("a", &cfg).await;
        }
        let mut f = std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap();
        writeln!(f, "{{not json").unwrap();
        let v =
            CachedVerifier::open(MockVerifier::new(VerificationOutcome::timeout()), &path).unwrap();
        let o = v.verify("a", &cfg).await;
        assert!(o.cached);
        assert_eq!(o.obligations_verified, 3);
        assert_eq!(v.inner().calls(), 0);
    }

    #[test]
    fn key_depends_on_options_not_executable() {
        let a = VerifierConfig::default();
        let b = VerifierConfig {
            executable: "/opt/dafny".into(),
            ..a.clone()
        };
        assert_eq!(cache_key("x", &a), cache_key("x", &b));
        assert_ne!(
            cache_key("x", &a),
            cache_key("x", &a.clone().with_timeout(10.0))
        );
        assert_ne!(cache_key("x", &a), cache_key("y", &a));
    }
}
