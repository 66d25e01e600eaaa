//! Offline providers: replay files, in-memory scripts, and a recorder that
//! captures live traffic into replay files.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::prompt::{Message, Role};
use super::provider::{Completion, Provider, ProviderConfig, ProviderError};

/// Hash of everything that determines a request's response.
pub fn replay_key(cfg: &ProviderConfig, messages: &[Message]) -> String {
    let material = serde_json::json!([cfg.name, cfg.model_id, messages]);
    hex::encode(Sha256::digest(material.to_string().as_bytes()))
}

/// One canned response. Matching fields that are absent match anything;
/// `contains` is tested against the last user message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReplayEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<Completion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ProviderError>,
}

impl ReplayEntry {
    fn matches(&self, key: &str, cfg: &ProviderConfig, messages: &[Message]) -> bool {
        if self.key.as_deref().is_some_and(|k| k != key) {
            return false;
        }
        if self.provider.as_deref().is_some_and(|p| p != cfg.name) {
            return false;
        }
        if let Some(needle) = &self.contains {
            let last_user = messages.iter().rev().find(|m| m.role == Role::User);
            if !last_user.is_some_and(|m| m.content.contains(needle.as_str())) {
                return false;
            }
        }
        true
    }
}

/// Serves each entry at most once, the first unused match in file order.
pub struct ReplayProvider {
    entries: Mutex<Vec<(ReplayEntry, bool)>>,
}

impl ReplayProvider {
    pub fn new(entries: Vec<ReplayEntry>) -> Self {
        Self {
            entries: Mutex::new(entries.into_iter().map(|e| (e, false)).collect()),
        }
    }

    /// Reads every `*.jsonl` file under `path` (or `path` itself) in name order.
    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        let mut files: Vec<PathBuf> = if path.is_dir() {
            std::fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect()
        } else {
            vec![path.to_path_buf()]
        };
        files.sort();
        let mut entries = Vec::new();
        for f in files {
            for (i, line) in std::fs::read_to_string(&f)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let e: ReplayEntry = serde_json::from_str(line).map_err(|e| {
                    std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("{}:{}: {e}", f.display(), i + 1),
                    )
                })?;
                entries.push(e);
            }
        }
        Ok(Self::new(entries))
    }

    pub fn remaining(&self) -> usize {
        self.entries
            .lock()
            .unwrap()
            .iter()
            .filter(|(_, used)| !used)
            .count()
    }
}

#[async_trait]
impl Provider for ReplayProvider {
    async fn complete(
        &self,
        cfg: &ProviderConfig,
        messages: &[Message],
    ) -> Result<Completion, ProviderError> {
        let key = replay_key(cfg, messages);
        let mut entries = self.entries.lock().unwrap();
        let Some((entry, used)) = entries
            .iter_mut()
            .find(|(e, used)| !*used && e.matches(&key, cfg, messages))
        else {
            return Err(ProviderError::Replay(format!(
                "no unused response for provider {} and request {}",
                cfg.name,
                &key[..12]
            )));
        };
        *used = true;
        match (&entry.completion, &entry.error) {
            (_, Some(err)) => Err(err.clone()),
            (Some(c), None) => Ok(Completion {
                latency_s: Some(c.latency_s.unwrap_or(0.0)),
                ..c.clone()
            }),
            (None, None) => Err(ProviderError::Replay(
                "entry has neither completion nor error".into(),
            )),
        }
    }
}

/// Responses served in order; every request is recorded.
pub struct ScriptedProvider {
    script: Mutex<VecDeque<Result<Completion, ProviderError>>>,
    requests: Mutex<Vec<(String, Vec<Message>)>>,
}

impl ScriptedProvider {
    pub fn new(script: impl IntoIterator<Item = Result<Completion, ProviderError>>) -> Self {
        Self {
            script: Mutex::new(script.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// Convenience: each text becomes a completion wrapped in DAFNY tags.
    pub fn programs<S: AsRef<str>>(programs: impl IntoIterator<Item = S>) -> Self {
        Self::new(programs.into_iter().map(|p| {
            Ok(Completion::text(format!(
                "BEGIN DAFNY\n{}\nEND DAFNY\n",
                p.as_ref()
            )))
        }))
    }

    /// (provider name, messages) for every call so far.
    pub fn requests(&self) -> Vec<(String, Vec<Message>)> {
        self.requests.lock().unwrap().clone()
    }

    pub fn calls(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

#[async_trait]
impl Provider for ScriptedProvider {
    async fn complete(
        &self,
        cfg: &ProviderConfig,
        messages: &[Message],
    ) -> Result<Completion, ProviderError> {
        self.requests
            .lock()
            .unwrap()
            .push((cfg.name.clone(), messages.to_vec()));
        self.script
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(ProviderError::Replay("script exhausted".into())))
    }
}

/// Forwards to `inner` and appends each exchange to a replay file.
pub struct RecordingProvider<P> {
    inner: P,
    path: PathBuf,
    lock: Mutex<()>,
}

impl<P: Provider> RecordingProvider<P> {
    pub fn new(inner: P, path: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            path: path.into(),
            lock: Mutex::new(()),
        }
    }
}

#[async_trait]
impl<P: Provider> Provider for RecordingProvider<P> {
    async fn complete(
        &self,
        cfg: &ProviderConfig,
        messages: &[Message],
    ) -> Result<Completion, ProviderError> {
        let started = std::time::Instant::now();
        let result = self.inner.complete(cfg, messages).await;
        let entry = ReplayEntry {
            key: Some(replay_key(cfg, messages)),
            provider: Some(cfg.name.clone()),
            contains: None,
            completion: result.as_ref().ok().map(|c| Completion {
                latency_s: Some(
                    c.latency_s
                        .unwrap_or_else(|| started.elapsed().as_secs_f64()),
                ),
                ..c.clone()
            }),
            error: result.as_ref().err().cloned(),
        };
        let line = serde_json::to_string(&entry).expect("replay entry serializes");
        let _guard = self.lock.lock().unwrap();
        let written = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(err) = written {
            tracing::warn!(path = %self.path.display(), %err, "replay recording failed");
        }
        result
    }
}
