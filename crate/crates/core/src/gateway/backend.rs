//! Completion backends: live HTTP, replay, and scripted mock.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::store::FixtureStore;
use super::{CompletionRequest, FinishReason, GatewayError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendReply {
    pub text: String,
    pub finish_reason: FinishReason,
}

impl BackendReply {
    pub fn stop(text: impl Into<String>) -> BackendReply {
        BackendReply {
            text: text.into(),
            finish_reason: FinishReason::Stop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying: 429, 5xx, timeouts, dropped connections.
    Transient {
        status: Option<u16>,
        message: String,
    },
    Permanent {
        status: Option<u16>,
        message: String,
    },
    /// Replay store has no entry for this digest.
    Miss { digest: String },
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient { .. })
    }

    pub fn status(&self) -> Option<u16> {
        match self {
            BackendError::Transient { status, .. } | BackendError::Permanent { status, .. } => {
                *status
            }
            BackendError::Miss { .. } => None,
        }
    }

    pub fn from_status(status: u16, message: impl Into<String>) -> BackendError {
        let message = message.into();
        if status == 429 || (500..600).contains(&status) {
            BackendError::Transient {
                status: Some(status),
                message,
            }
        } else {
            BackendError::Permanent {
                status: Some(status),
                message,
            }
        }
    }
}

impl std::fmt::Display for BackendError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendError::Transient {
                status: Some(s),
                message,
            }
            | BackendError::Permanent {
                status: Some(s),
                message,
            } => {
                write!(f, "HTTP {s}: {message}")
            }
            BackendError::Transient {
                status: None,
                message,
            }
            | BackendError::Permanent {
                status: None,
                message,
            } => f.write_str(message),
            BackendError::Miss { digest } => {
                write!(f, "no recorded completion for digest {digest}")
            }
        }
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, BackendError>;
}

/// OpenAI-compatible chat-completions endpoint.
pub struct LiveBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl LiveBackend {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> LiveBackend {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        LiveBackend {
            agent,
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

/// Request body for one chat-completions call.
pub fn chat_request_body(req: &CompletionRequest) -> Value {
    json!({
        "model": req.model,
        "messages": [{"role": "user", "content": req.prompt_text}],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    })
}

/// Reads `choices[0].message.content` and `finish_reason` from a response body.
pub fn parse_chat_response(body: &str) -> Result<BackendReply, BackendError> {
    let malformed = |m: &str| BackendError::Permanent {
        status: None,
        message: format!("malformed completion response: {m}"),
    };
    let v: Value = serde_json::from_str(body).map_err(|e| malformed(&e.to_string()))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| malformed("no choices"))?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("no message content"))?;
    let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("length") => FinishReason::Length,
        Some("stop") | None => FinishReason::Stop,
        Some(_) => FinishReason::Error,
    };
    Ok(BackendReply {
        text: text.to_string(),
        finish_reason,
    })
}

impl Backend for LiveBackend {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, BackendError> {
        let mut call = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = call
            .send(chat_request_body(req).to_string())
            .map_err(|e| match e {
                ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed => {
                    BackendError::Transient {
                        status: None,
                        message: e.to_string(),
                    }
                }
                other => BackendError::Permanent {
                    status: None,
                    message: other.to_string(),
                },
            })?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transient {
                status: Some(status),
                message: e.to_string(),
            })?;
        if !(200..300).contains(&status) {
            let snippet: String = body.chars().take(200).collect();
            return Err(BackendError::from_status(status, snippet));
        }
        parse_chat_response(&body)
    }
}

/// Closed-world backend answering only from recorded fixtures.
pub struct ReplayBackend {
    store: Arc<FixtureStore>,
}

impl ReplayBackend {
    pub fn new(store: Arc<FixtureStore>) -> ReplayBackend {
        ReplayBackend { store }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ReplayBackend, GatewayError> {
        Ok(ReplayBackend::new(Arc::new(FixtureStore::load(path)?)))
    }

    pub fn store(&self) -> &FixtureStore {
        &self.store
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, BackendError> {
        let digest = req.digest();
        self.store
            .get(&digest)
            .map(BackendReply::stop)
            .ok_or(BackendError::Miss { digest })
    }
}

/// One rule of a mock script. All present conditions must hold.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    /// Matched against the text after the prompt's last blank line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_block_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_index: Option<u32>,
    pub reply: String,
}

impl MockRule {
    fn matches(&self, req: &CompletionRequest) -> bool {
        let last_block = req.prompt_text.rsplit("\n\n").next().unwrap_or("");
        self.contains
            .as_deref()
            .is_none_or(|s| req.prompt_text.contains(s))
            && self
                .last_block_contains
                .as_deref()
                .is_none_or(|s| last_block.contains(s))
            && self.sample_index.is_none_or(|i| i == req.sample_index)
    }
}

/// Ordered rules; the first matching rule replies.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
}

impl MockScript {
    pub fn constant(reply: impl Into<String>) -> MockScript {
        MockScript {
            rules: Vec::new(),
            default: Some(reply.into()),
        }
    }

    pub fn from_json(text: &str) -> Result<MockScript, GatewayError> {
        serde_json::from_str(text)
            .map_err(|e| GatewayError::Config(format!("invalid mock script: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MockScript, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::io(path, e))?;
        MockScript::from_json(&text)
    }

    pub fn reply_for(&self, req: &CompletionRequest) -> Option<&str> {
        self.rules
            .iter()
            .find(|r| r.matches(req))
            .map(|r| r.reply.as_str())
            .or(self.default.as_deref())
    }
}

pub struct MockBackend {
    script: MockScript,
}

impl MockBackend {
    pub fn new(script: MockScript) -> MockBackend {
        MockBackend { script }
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, BackendError> {
        self.script
            .reply_for(req)
            .map(BackendReply::stop)
            .ok_or_else(|| BackendError::Permanent {
                status: None,
                message: "mock script has no matching rule and no default".into(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_classification() {
        assert!(BackendError::from_status(429, "").is_transient());
        assert!(BackendError::from_status(503, "").is_transient());
        assert!(!BackendError::from_status(401, "").is_transient());
    }

    #[test]
    fn parses_chat_completion_body() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"Bad"},"finish_reason":"length"}]}"#;
        let reply = parse_chat_response(body).unwrap();
        assert_eq!(reply.text, "Bad");
        assert_eq!(reply.finish_reason, FinishReason::Length);
        assert!(parse_chat_response("{}").is_err());
    }

    #[test]
    fn request_body_shape() {
        let req = CompletionRequest::new("gpt-x", "hi", 0.0, 16, 0);
        let body = chat_request_body(&req);
        assert_eq!(body["messages"][0]["content"], "hi");
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["max_tokens"], 16);
    }

    #[test]
    fn mock_rules_in_order() {
        let script = MockScript::from_json(
            r#"{"rules": [
                {"last_block_contains": "Query: a", "sample_index": 1, "reply": "one"},
                {"contains": "Query: a", "reply": "any"}
            ], "default": "fallback"}"#,
        )
        .unwrap();
        let req = |p: &str, i| CompletionRequest::new("m", p, 0.0, 8, i);
        assert_eq!(script.reply_for(&req("h\n\nQuery: a", 1)), Some("one"));
        assert_eq!(
            script.reply_for(&req("Query: a\n\nQuery: b", 1)),
            Some("any")
        );
        assert_eq!(script.reply_for(&req("zzz", 0)), Some("fallback"));
    }

    #[test]
    fn replay_miss_names_digest() {
        let backend = ReplayBackend::new(Arc::new(FixtureStore::in_memory()));
        let req = CompletionRequest::new("m", "p", 0.0, 8, 0);
        assert_eq!(
            backend.complete(&req),
            Err(BackendError::Miss {
                digest: req.digest()
            })
        );
    }
}
