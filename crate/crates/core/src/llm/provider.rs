//! Provider configuration and the chat-completion abstraction.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::prompt::Message;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    None,
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// OpenAI-compatible chat completions.
    #[default]
    OpenAi,
    Anthropic,
    /// Canned responses from a replay file.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub name: String,
    pub kind: ProviderKind,
    pub model_id: String,
    pub temperature: f64,
    pub reasoning_effort: Option<ReasoningEffort>,
    /// Currency per token.
    pub cost_per_input_token: f64,
    pub cost_per_output_token: f64,
    /// Lower is preferred.
    pub priority: u32,
    pub timeout_s: f64,
    pub endpoint: Option<String>,
    /// Environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub auth_header: Option<String>,
    pub max_tokens: u32,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            name: String::new(),
            kind: ProviderKind::OpenAi,
            model_id: String::new(),
            temperature: 0.5,
            reasoning_effort: None,
            cost_per_input_token: 0.0,
            cost_per_output_token: 0.0,
            priority: 0,
            timeout_s: 300.0,
            endpoint: None,
            api_key_env: None,
            auth_header: None,
            max_tokens: 16_000,
        }
    }
}

impl ProviderConfig {
    pub fn named(name: impl Into<String>, priority: u32) -> Self {
        let name = name.into();
        Self {
            model_id: name.clone(),
            name,
            priority,
            ..Default::default()
        }
    }

    pub fn cost(&self, input_tokens: u64, output_tokens: u64) -> f64 {
        input_tokens as f64 * self.cost_per_input_token
            + output_tokens as f64 * self.cost_per_output_token
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.name.is_empty() {
            return Err("provider name is empty".into());
        }
        if !(self.temperature >= 0.0) {
            return Err(format!("provider {}: temperature must be >= 0", self.name));
        }
        if !(self.timeout_s > 0.0) {
            return Err(format!("provider {}: timeout must be positive", self.name));
        }
        Ok(())
    }
}

/// Priorities must be unique within a run.
pub fn validate_providers(providers: &[ProviderConfig]) -> Result<(), String> {
    let mut seen = std::collections::BTreeMap::new();
    for p in providers {
        p.validate()?;
        if let Some(other) = seen.insert(p.priority, &p.name) {
            return Err(format!(
                "providers {other} and {} share priority {}",
                p.name, p.priority
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Latency reported by the provider itself (replayed runs); measured
    /// wall time is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_s: Option<f64>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            input_tokens: 0,
            output_tokens: 0,
            latency_s: Some(0.0),
        }
    }

    pub fn with_usage(mut self, input_tokens: u64, output_tokens: u64) -> Self {
        self.input_tokens = input_tokens;
        self.output_tokens = output_tokens;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "type", content = "detail", rename_all = "snake_case")]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("replay: {0}")]
    Replay(String),
}

#[async_trait]
pub trait Provider: Send + Sync {
    async fn complete(
        &self,
        cfg: &ProviderConfig,
        messages: &[Message],
    ) -> Result<Completion, ProviderError>;
}

#[async_trait]
impl<T: Provider + ?Sized> Provider for std::sync::Arc<T> {
    async fn complete(
        &self,
        cfg: &ProviderConfig,
        messages: &[Message],
    ) -> Result<Completion, ProviderError> {
        (**self).complete(cfg, messages).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_is_linear_in_tokens() {
        let p = ProviderConfig {
            cost_per_input_token: 2e-6,
            cost_per_output_token: 8e-6,
            ..ProviderConfig::named("a", 1)
        };
        assert!((p.cost(1000, 500) - 0.006).abs() < 1e-12);
    }

    #[test]
    fn priorities_must_be_unique() {
        let ps = [ProviderConfig::named("a", 1), ProviderConfig::named("b", 1)];
        assert!(validate_providers(&ps).is_err());
        let ps = [ProviderConfig::named("a", 1), ProviderConfig::named("b", 2)];
        assert!(validate_providers(&ps).is_ok());
        let neg = ProviderConfig {
            temperature: -0.1,
            ..ProviderConfig::named("c", 3)
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn config_defaults_from_toml() {
        let p: ProviderConfig =
            toml::from_str("name = \"x\"\nmodel_id = \"m\"\npriority = 2\n").unwrap();
        assert_eq!(p.temperature, 0.5);
        assert_eq!(p.kind, ProviderKind::OpenAi);
    }
}
