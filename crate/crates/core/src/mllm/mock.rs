use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, ChatRequest, Completion, RequestTag, TokenUsage};

/// One canned reply. Entries sharing a key are replayed in `attempt` order;
/// once the last one is reached it keeps being returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub module: String,
    pub query: String,
    pub iteration: u32,
    #[serde(default)]
    pub attempt: u32,
    #[serde(default)]
    pub response: Option<String>,
    /// Simulated transport failure instead of a response.
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub usage: Option<TokenUsage>,
}

impl FixtureEntry {
    pub fn new(module: &str, query: &str, iteration: u32, response: &str) -> Self {
        FixtureEntry {
            module: module.into(),
            query: query.into(),
            iteration,
            attempt: 0,
            response: Some(response.into()),
            error: None,
            usage: None,
        }
    }

    fn key(&self) -> RequestTag {
        RequestTag::new(&self.module, &self.query, self.iteration)
    }
}

/// Deterministic fixture-replay backend, keyed exactly on `(module, query, iteration)`.
#[derive(Debug, Default)]
pub struct MockBackend {
    table: HashMap<RequestTag, Vec<FixtureEntry>>,
    calls: Mutex<HashMap<RequestTag, usize>>,
}

impl MockBackend {
    pub fn new(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        let mut table: HashMap<RequestTag, Vec<FixtureEntry>> = HashMap::new();
        for e in entries {
            table.entry(e.key()).or_default().push(e);
        }
        for list in table.values_mut() {
            list.sort_by_key(|e| e.attempt);
        }
        MockBackend { table, calls: Mutex::new(HashMap::new()) }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(MockBackend::new(serde_json::from_str::<Vec<FixtureEntry>>(text)?))
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        MockBackend::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn len(&self) -> usize {
        self.table.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        let missing = |tag: Option<&RequestTag>| {
            let tag = tag.cloned().unwrap_or_else(|| RequestTag::new("", "", 0));
            BackendError::MissingFixture { module: tag.module, query: tag.query, iteration: tag.iteration }
        };
        let tag = request.tag.as_ref().ok_or_else(|| missing(None))?;
        let list = self.table.get(tag).ok_or_else(|| missing(Some(tag)))?;
        let n = {
            let mut calls = self.calls.lock().unwrap_or_else(|e| e.into_inner());
            let c = calls.entry(tag.clone()).or_insert(0);
            let n = *c;
            *c += 1;
            n
        };
        let entry = &list[n.min(list.len() - 1)];
        if let Some(err) = &entry.error {
            return Err(BackendError::Transport(err.clone()));
        }
        match &entry.response {
            Some(text) => Ok(Completion { text: text.clone(), usage: entry.usage }),
            None => Err(BackendError::BadResponse("fixture has neither response nor error".into())),
        }
    }

    fn retry_pause(&self) -> Duration {
        Duration::ZERO
    }

    fn name(&self) -> &str {
        "mock"
    }
}
