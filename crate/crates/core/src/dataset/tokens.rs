use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::mllm::{Transcript, TranscriptEntry};

/// Token totals of one run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTokens {
    pub run_dir: PathBuf,
    pub query: String,
    pub requests: usize,
    pub images: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
    pub tokens_per_image: Option<f64>,
    /// Some entries lacked provider counts and were estimated by whitespace splitting.
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTokens {
    pub runs: usize,
    pub images: usize,
    pub total_tokens: u64,
    pub tokens_per_image: Option<f64>,
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenReport {
    pub runs: Vec<RunTokens>,
    pub per_query: BTreeMap<String, QueryTokens>,
    pub total_tokens: u64,
    pub images: usize,
    pub tokens_per_image: Option<f64>,
    pub approximate: bool,
}

fn words(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

fn entry_tokens(e: &TranscriptEntry) -> (u64, u64, bool) {
    match &e.usage {
        Some(u) => (u.prompt_tokens, u.completion_tokens, false),
        None => {
            let prompt = e.messages.iter().map(|m| words(&m.text)).sum();
            (prompt, e.response.as_deref().map_or(0, words), true)
        }
    }
}

fn per_image(total: u64, images: usize) -> Option<f64> {
    (images > 0).then(|| total as f64 / images as f64)
}

fn count_views(dir: &Path) -> usize {
    let Ok(entries) = std::fs::read_dir(dir) else { return 0 };
    entries
        .flatten()
        .map(|e| e.path())
        .map(|p| {
            if p.is_dir() {
                count_views(&p)
            } else {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                usize::from(name.starts_with("view_") && name.ends_with(".png"))
            }
        })
        .sum()
}

fn summarize_run(dir: &Path) -> Result<RunTokens, DatasetError> {
    let path = dir.join("transcript.jsonl");
    if !path.is_file() {
        return Err(DatasetError::MissingTranscript(dir.to_path_buf()));
    }
    let entries = Transcript::read_jsonl(&path).map_err(|e| DatasetError::Format(format!("{}: {e}", path.display())))?;
    let run: Option<serde_json::Value> =
        std::fs::read_to_string(dir.join("run.json")).ok().and_then(|t| serde_json::from_str(&t).ok());
    let images = run
        .as_ref()
        .and_then(|r| r.get("images"))
        .and_then(|v| v.as_u64())
        .map_or_else(|| count_views(dir), |n| n as usize);
    let query = run
        .as_ref()
        .and_then(|r| r.get("query"))
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .or_else(|| entries.iter().find_map(|e| e.tag.as_ref().map(|t| t.query.clone())))
        .unwrap_or_else(|| dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());

    let (mut prompt, mut completion, mut approximate) = (0, 0, false);
    for e in &entries {
        let (p, c, approx) = entry_tokens(e);
        prompt += p;
        completion += c;
        approximate |= approx;
    }
    let total = prompt + completion;
    Ok(RunTokens {
        run_dir: dir.to_path_buf(),
        query,
        requests: entries.len(),
        images,
        prompt_tokens: prompt,
        completion_tokens: completion,
        total_tokens: total,
        tokens_per_image: per_image(total, images),
        approximate,
    })
}

/// Token totals per run, per query and overall, read from each run's
/// `transcript.jsonl` (every attempt counts) and `run.json` image count.
pub fn summarize_tokens(run_dirs: &[PathBuf]) -> Result<TokenReport, DatasetError> {
    if run_dirs.is_empty() {
        return Err(DatasetError::InvalidConfig("no run directories given".into()));
    }
    let runs: Vec<RunTokens> = run_dirs.iter().map(|d| summarize_run(d)).collect::<Result<_, _>>()?;
    let mut per_query: BTreeMap<String, QueryTokens> = BTreeMap::new();
    for r in &runs {
        let q = per_query.entry(r.query.clone()).or_insert(QueryTokens {
            runs: 0,
            images: 0,
            total_tokens: 0,
            tokens_per_image: None,
            approximate: false,
        });
        q.runs += 1;
        q.images += r.images;
        q.total_tokens += r.total_tokens;
        q.approximate |= r.approximate;
    }
    for q in per_query.values_mut() {
        q.tokens_per_image = per_image(q.total_tokens, q.images);
    }
    let total_tokens = runs.iter().map(|r| r.total_tokens).sum();
    let images = runs.iter().map(|r| r.images).sum();
    Ok(TokenReport {
        approximate: runs.iter().any(|r| r.approximate),
        per_query,
        total_tokens,
        images,
        tokens_per_image: per_image(total_tokens, images),
        runs,
    })
}
