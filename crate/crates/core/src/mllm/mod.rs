//! Backend-agnostic multimodal LLM client.
//!
//! Agents talk to a [`Backend`] through [`Client`], which validates requests,
//! resubmits failed calls verbatim and records every attempt in a shared
//! [`Transcript`]. [`MockBackend`] replays fixture files for deterministic runs;
//! [`LiveBackend`] speaks the common chat-completions wire format.

mod extract;
mod live;
mod mock;
mod transcript;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{
    extract_code_block, extract_json, extract_list, extract_numeric_list, extract_structured_list, parse_python_literal,
    ExtractError,
};
pub use live::{LiveBackend, LiveConfig};
pub use mock::{FixtureEntry, MockBackend};
pub use transcript::{Transcript, TranscriptEntry};

pub const DEFAULT_MODEL: &str = "gpt-4o-2024-08-06";
pub const DEFAULT_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const MAX_IMAGES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageAttachment {
    pub media_type: String,
    pub data_base64: String,
}

impl ImageAttachment {
    pub fn png(bytes: &[u8]) -> Self {
        use base64::Engine;
        ImageAttachment {
            media_type: "image/png".into(),
            data_base64: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
    }

    pub fn data_url(&self) -> String {
        format!("data:{};base64,{}", self.media_type, self.data_base64)
    }
}

/// Identifies which agent module issued a request; the mock backend keys on it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RequestTag {
    pub module: String,
    pub query: String,
    pub iteration: u32,
}

impl RequestTag {
    pub fn new(module: &str, query: &str, iteration: u32) -> Self {
        RequestTag { module: module.into(), query: query.into(), iteration }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    #[serde(default)]
    pub images: Vec<ImageAttachment>,
    pub temperature: f64,
    pub model_id: String,
    pub max_tokens: u32,
    #[serde(default)]
    pub tag: Option<RequestTag>,
}

impl ChatRequest {
    pub fn user(text: impl Into<String>) -> Self {
        ChatRequest {
            messages: vec![Message { role: Role::User, text: text.into() }],
            images: Vec::new(),
            temperature: DEFAULT_TEMPERATURE,
            model_id: DEFAULT_MODEL.into(),
            max_tokens: 4096,
            tag: None,
        }
    }

    pub fn tagged(mut self, tag: RequestTag) -> Self {
        self.tag = Some(tag);
        self
    }

    pub fn with_images(mut self, images: Vec<ImageAttachment>) -> Self {
        self.images = images;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn check(&self) -> Result<(), MllmError> {
        let bad = |m: String| Err(MllmError::InvalidRequest(m));
        if self.messages.is_empty() {
            return bad("request needs at least one message".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive".into());
        }
        if self.images.len() > MAX_IMAGES {
            return bad(format!("{} images attached, at most {MAX_IMAGES} allowed", self.images.len()));
        }
        Ok(())
    }

    /// All message text, concatenated; used for approximate token counts.
    pub fn text(&self) -> String {
        self.messages.iter().map(|m| m.text.as_str()).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Option<TokenUsage>,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited")]
    RateLimited,
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("authentication rejected")]
    Auth,
    #[error("malformed backend response: {0}")]
    BadResponse(String),
    #[error("no fixture for {module}/{query}/{iteration}")]
    MissingFixture { module: String, query: String, iteration: u32 },
}

impl BackendError {
    /// Whether resubmitting the same request can help.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::RateLimited | BackendError::BadResponse(_) => true,
            BackendError::Http { status, .. } => *status >= 500,
            BackendError::Auth | BackendError::MissingFixture { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MllmError {
    #[error("backend failed {attempts} times, last error: {last}")]
    BackendExhausted { attempts: u32, last: BackendError },
    #[error(transparent)]
    Backend(BackendError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// A chat-completion provider. Implementations must be shareable across threads.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError>;

    /// Pause between resubmissions.
    fn retry_pause(&self) -> Duration {
        Duration::from_secs(1)
    }

    fn name(&self) -> &str;
}

/// Submits `request`, resubmitting it unchanged after each retryable failure,
/// up to `max_retries` extra attempts. Every attempt is logged.
pub fn complete_with_retries(
    backend: &dyn Backend,
    request: &ChatRequest,
    max_retries: u32,
    transcript: &Transcript,
) -> Result<Completion, MllmError> {
    request.check()?;
    let mut attempt = 0;
    loop {
        let result = backend.complete(request);
        transcript.record(request, &result, attempt);
        match result {
            Ok(c) => return Ok(c),
            Err(e) if !e.is_retryable() => return Err(MllmError::Backend(e)),
            Err(e) if attempt >= max_retries => {
                return Err(MllmError::BackendExhausted { attempts: attempt + 1, last: e })
            }
            Err(e) => {
                log::warn!("{} attempt {} failed: {e}; resubmitting", backend.name(), attempt + 1);
                let pause = backend.retry_pause();
                if !pause.is_zero() {
                    std::thread::sleep(pause);
                }
                attempt += 1;
            }
        }
    }
}

/// Backend handle plus the shared transcript and retry budget.
#[derive(Clone)]
pub struct Client {
    pub backend: Arc<dyn Backend>,
    pub transcript: Arc<Transcript>,
    pub max_retries: u32,
    pub temperature: f64,
    pub model_id: String,
}

impl Client {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Client {
            backend,
            transcript: Arc::new(Transcript::default()),
            max_retries: DEFAULT_MAX_RETRIES,
            temperature: DEFAULT_TEMPERATURE,
            model_id: DEFAULT_MODEL.into(),
        }
    }

    pub fn with_transcript(mut self, transcript: Arc<Transcript>) -> Self {
        self.transcript = transcript;
        self
    }

    /// Builds a user request from `prompt` with the client's sampling settings.
    pub fn request(&self, prompt: String, tag: RequestTag) -> ChatRequest {
        let mut r = ChatRequest::user(prompt).tagged(tag).with_temperature(self.temperature);
        r.model_id = self.model_id.clone();
        r
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<Completion, MllmError> {
        complete_with_retries(self.backend.as_ref(), request, self.max_retries, &self.transcript)
    }
}
