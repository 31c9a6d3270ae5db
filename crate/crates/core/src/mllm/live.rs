use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, BackendError, ChatRequest, Completion, Role, TokenUsage, DEFAULT_MODEL};

pub const ENV_ENDPOINT: &str = "PROTO3D_API_URL";
pub const ENV_API_KEY: &str = "PROTO3D_API_KEY";
pub const ENV_MODEL: &str = "PROTO3D_MODEL";
pub const ENV_MAX_INFLIGHT: &str = "PROTO3D_MAX_INFLIGHT";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Clone, PartialEq)]
pub struct LiveConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model_id: String,
    pub max_inflight: usize,
    pub timeout: Duration,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            endpoint: DEFAULT_ENDPOINT.into(),
            api_key: None,
            model_id: DEFAULT_MODEL.into(),
            max_inflight: 4,
            timeout: Duration::from_secs(120),
        }
    }
}

impl LiveConfig {
    /// Reads `PROTO3D_API_URL`, `PROTO3D_API_KEY` (falling back to
    /// `OPENAI_API_KEY`), `PROTO3D_MODEL` and `PROTO3D_MAX_INFLIGHT`.
    pub fn from_env() -> LiveConfig {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let d = LiveConfig::default();
        LiveConfig {
            endpoint: var(ENV_ENDPOINT).unwrap_or(d.endpoint),
            api_key: var(ENV_API_KEY).or_else(|| var("OPENAI_API_KEY")),
            model_id: var(ENV_MODEL).unwrap_or(d.model_id),
            max_inflight: var(ENV_MAX_INFLIGHT).and_then(|v| v.parse().ok()).filter(|&n| n > 0).unwrap_or(d.max_inflight),
            timeout: d.timeout,
        }
    }
}

/// Counting gate bounding the number of concurrent requests.
#[derive(Debug)]
struct Gate {
    limit: usize,
    busy: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut busy = self.busy.lock().unwrap_or_else(|e| e.into_inner());
        while *busy >= self.limit {
            busy = self.freed.wait(busy).unwrap_or_else(|e| e.into_inner());
        }
        *busy += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut busy = self.0.busy.lock().unwrap_or_else(|e| e.into_inner());
        *busy -= 1;
        self.0.freed.notify_one();
    }
}

/// Chat-completions client for any OpenAI-compatible endpoint.
pub struct LiveBackend {
    config: LiveConfig,
    http: reqwest::blocking::Client,
    gate: Gate,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, BackendError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let gate = Gate { limit: config.max_inflight.max(1), busy: Mutex::new(0), freed: Condvar::new() };
        Ok(LiveBackend { config, http, gate })
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }
}

/// JSON body for a chat-completions call. Images ride along with the last
/// user message as base64 data URLs.
pub fn request_body(request: &ChatRequest, fallback_model: &str) -> Value {
    let last_user = request.messages.iter().rposition(|m| m.role == Role::User);
    let messages: Vec<Value> = request
        .messages
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            if Some(i) == last_user && !request.images.is_empty() {
                let mut parts = vec![json!({"type": "text", "text": m.text})];
                parts.extend(
                    request.images.iter().map(|img| json!({"type": "image_url", "image_url": {"url": img.data_url()}})),
                );
                json!({"role": role, "content": parts})
            } else {
                json!({"role": role, "content": m.text})
            }
        })
        .collect();
    let model = if request.model_id.is_empty() { fallback_model } else { request.model_id.as_str() };
    json!({
        "model": model,
        "messages": messages,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    })
}

pub fn parse_response(body: &Value) -> Result<Completion, BackendError> {
    let text = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::BadResponse("missing choices[0].message.content".into()))?;
    let usage = body.get("usage").and_then(|u| {
        Some(TokenUsage {
            prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
            completion_tokens: u.get("completion_tokens")?.as_u64()?,
        })
    });
    Ok(Completion { text: text.to_string(), usage })
}

impl Backend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        let _slot = self.gate.acquire();
        let mut call = self.http.post(&self.config.endpoint).json(&request_body(request, &self.config.model_id));
        if let Some(key) = &self.config.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200..=299 => {
                let body: Value = serde_json::from_str(&text).map_err(|e| BackendError::BadResponse(e.to_string()))?;
                parse_response(&body)
            }
            401 | 403 => Err(BackendError::Auth),
            429 => Err(BackendError::RateLimited),
            _ => Err(BackendError::Http { status, body: text.chars().take(500).collect() }),
        }
    }

    fn name(&self) -> &str {
        "live"
    }
}
