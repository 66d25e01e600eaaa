//! HTTPS chat providers: OpenAI-compatible chat completions and the
//! Anthropic messages API.

use async_trait::async_trait;
use serde_json::{json, Value};
use std::time::Duration;

use super::prompt::{Message, Role};
use super::provider::{
    Completion, Provider, ProviderConfig, ProviderError, ProviderKind, ReasoningEffort,
};

const OPENAI_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
const ANTHROPIC_ENDPOINT: &str = "https://api.anthropic.com/v1/messages";
const ANTHROPIC_VERSION: &str = "2023-06-01";

pub struct HttpProvider {
    client: reqwest::Client,
}

impl HttpProvider {
    pub fn new() -> Self {
        Self {
            client: reqwest::Client::new(),
        }
    }
}

impl Default for HttpProvider {
    fn default() -> Self {
        Self::new()
    }
}

fn role_name(r: Role) -> &'static str {
    match r {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

fn effort_name(e: ReasoningEffort) -> &'static str {
    match e {
        ReasoningEffort::None => "none",
        ReasoningEffort::Low => "low",
        ReasoningEffort::Medium => "medium",
        ReasoningEffort::High => "high",
    }
}

fn api_key(cfg: &ProviderConfig) -> Result<Option<String>, ProviderError> {
    match &cfg.api_key_env {
        None => Ok(None),
        Some(var) => std::env::var(var)
            .map(Some)
            .map_err(|_| ProviderError::Config(format!("environment variable {var} is not set"))),
    }
}

pub(crate) fn openai_body(cfg: &ProviderConfig, messages: &[Message]) -> Value {
    let msgs: Vec<Value> = messages
        .iter()
        .map(|m| json!({"role": role_name(m.role), "content": m.content}))
        .collect();
    let mut body = json!({"model": cfg.model_id, "messages": msgs, "temperature": cfg.temperature});
    if let Some(e) = cfg.reasoning_effort {
        body["reasoning_effort"] = json!(effort_name(e));
    }
    body
}

pub(crate) fn anthropic_body(cfg: &ProviderConfig, messages: &[Message]) -> Value {
    let system: Vec<&str> = messages
        .iter()
        .filter(|m| m.role == Role::System)
        .map(|m| m.content.as_str())
        .collect();
    let msgs: Vec<Value> = messages
        .iter()
        .filter(|m| m.role != Role::System)
        .map(|m| json!({"role": role_name(m.role), "content": m.content}))
        .collect();
    json!({
        "model": cfg.model_id,
        "system": system.join("\n\n"),
        "messages": msgs,
        "max_tokens": cfg.max_tokens,
        "temperature": cfg.temperature,
    })
}

fn parse_openai(v: &Value) -> Option<Completion> {
    let text = v["choices"][0]["message"]["content"].as_str()?.to_string();
    Some(Completion {
        text,
        input_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        output_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        latency_s: None,
    })
}

fn parse_anthropic(v: &Value) -> Option<Completion> {
    let parts = v["content"].as_array()?;
    let text: String = parts
        .iter()
        .filter(|p| p["type"] == "text")
        .filter_map(|p| p["text"].as_str())
        .collect();
    Some(Completion {
        text,
        input_tokens: v["usage"]["input_tokens"].as_u64().unwrap_or(0),
        output_tokens: v["usage"]["output_tokens"].as_u64().unwrap_or(0),
        latency_s: None,
    })
}

#[async_trait]
impl Provider for HttpProvider {
    async fn complete(
        &self,
        cfg: &ProviderConfig,
        messages: &[Message],
    ) -> Result<Completion, ProviderError> {
        let key = api_key(cfg)?;
        let (url, body) = match cfg.kind {
            ProviderKind::OpenAi => (
                cfg.endpoint.as_deref().unwrap_or(OPENAI_ENDPOINT),
                openai_body(cfg, messages),
            ),
            ProviderKind::Anthropic => (
                cfg.endpoint.as_deref().unwrap_or(ANTHROPIC_ENDPOINT),
                anthropic_body(cfg, messages),
            ),
            ProviderKind::Replay => {
                return Err(ProviderError::Config(
                    "replay providers are not served over HTTP".into(),
                ))
            }
        };
        let mut req = self
            .client
            .post(url)
            .timeout(Duration::from_secs_f64(cfg.timeout_s))
            .json(&body);
        if cfg.kind == ProviderKind::Anthropic {
            req = req.header("anthropic-version", ANTHROPIC_VERSION);
        }
        if let Some(key) = key {
            let header = cfg.auth_header.clone().unwrap_or_else(|| match cfg.kind {
                ProviderKind::Anthropic => "x-api-key".into(),
                _ => "Authorization".into(),
            });
            let value = if header.eq_ignore_ascii_case("authorization") {
                format!("Bearer {key}")
            } else {
                key
            };
            req = req.header(header, value);
        }
        let resp = req.send().await.map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp
            .text()
            .await
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if status.as_u16() == 429 {
            return Err(ProviderError::RateLimited(text));
        }
        if !status.is_success() {
            return Err(ProviderError::Http {
                status: status.as_u16(),
                body: text.chars().take(2000).collect(),
            });
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Transport(format!("bad JSON: {e}")))?;
        let parsed = match cfg.kind {
            ProviderKind::Anthropic => parse_anthropic(&v),
            _ => parse_openai(&v),
        };
        parsed.ok_or_else(|| ProviderError::Transport("response has no message content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn openai_request_shape() {
        let cfg = ProviderConfig {
            reasoning_effort: Some(ReasoningEffort::High),
            ..ProviderConfig::named("o", 1)
        };
        let b = openai_body(&cfg, &[Message::system("s"), Message::user("u")]);
        assert_eq!(b["messages"][0]["role"], "system");
        assert_eq!(b["messages"][1]["content"], "u");
        assert_eq!(b["reasoning_effort"], "high");
        assert_eq!(b["temperature"], 0.5);
    }

    #[test]
    fn anthropic_request_moves_system_out() {
        let b = anthropic_body(
            &ProviderConfig::named("c", 1),
            &[Message::system("s"), Message::user("u")],
        );
        assert_eq!(b["system"], "s");
        assert_eq!(b["messages"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn response_parsing() {
        let o = json!({"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":4}});
        let c = parse_openai(&o).unwrap();
        assert_eq!(
            (c.text.as_str(), c.input_tokens, c.output_tokens),
            ("hi", 3, 4)
        );
        let a = json!({"content":[{"type":"thinking","thinking":"x"},{"type":"text","text":"yo"}],"usage":{"input_tokens":1,"output_tokens":2}});
        let c = parse_anthropic(&a).unwrap();
        assert_eq!(
            (c.text.as_str(), c.input_tokens, c.output_tokens),
            ("yo", 1, 2)
        );
    }

    #[tokio::test]
    async fn missing_key_is_config_error() {
        let cfg = ProviderConfig {
            api_key_env: Some("ANNOT_TEST_SURELY_UNSET_KEY".into()),
            ..ProviderConfig::named("o", 1)
        };
        let e = HttpProvider::new().complete(&cfg, &[]).await.unwrap_err();
        assert!(matches!(e, ProviderError::Config(_)));
    }
}
