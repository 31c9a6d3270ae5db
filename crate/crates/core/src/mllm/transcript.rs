use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatRequest, Completion, Message, RequestTag, TokenUsage};

/// One backend attempt. Image payloads are not stored, only their count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub timestamp_ms: u128,
    pub tag: Option<RequestTag>,
    pub attempt: u32,
    pub model_id: String,
    pub messages: Vec<Message>,
    pub image_count: usize,
    pub response: Option<String>,
    pub error: Option<String>,
    pub usage: Option<TokenUsage>,
}

/// Append-only, internally synchronized log of backend attempts.
#[derive(Debug, Default)]
pub struct Transcript {
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl Transcript {
    pub fn record(&self, request: &ChatRequest, result: &Result<Completion, BackendError>, attempt: u32) {
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        let timestamp_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        let (response, error, usage) = match result {
            Ok(c) => (Some(c.text.clone()), None, c.usage),
            Err(e) => (None, Some(e.to_string()), None),
        };
        let seq = entries.len() as u64;
        entries.push(TranscriptEntry {
            seq,
            timestamp_ms,
            tag: request.tag.clone(),
            attempt,
            model_id: request.model_id.clone(),
            messages: request.messages.clone(),
            image_count: request.images.len(),
            response,
            error,
            usage,
        });
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_jsonl(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in self.entries() {
            serde_json::to_writer(&mut f, &e)?;
            f.write_all(b"\n")?;
        }
        f.flush()
    }

    pub fn read_jsonl(path: &Path) -> std::io::Result<Vec<TranscriptEntry>> {
        let text = std::fs::read_to_string(path)?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
            .collect()
    }
}
