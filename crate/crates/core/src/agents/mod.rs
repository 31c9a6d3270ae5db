//! The three agents and the self-refinement loop.
//!
//! The designer turns a category name into a metric canvas, a part list and a
//! cuboid layout; the coder turns the layout into ProtoScene and refines it;
//! the visual inspector renders the program, guesses what it shows and, on a
//! miss, recommends edits for the next refinement round.

mod coder;
mod designer;
mod inspector;
mod pipeline;
mod templates;
mod types;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mllm::{ExtractError, MllmError};
use crate::render::RenderError;
use crate::scene::ArrangementError;

pub use coder::{proposal_to_code, refine_code, run_naive, RefineOutcome};
pub use designer::{arrangement_json, decompose, metricize, propose_arrangement, MAX_CANVAS_DIM};
pub use inspector::{identify, normalize_label, normalize_prediction, prediction_matches, recommend_edits, MAX_EDITS};
pub use pipeline::{
    run_pipeline, write_run_dir, AgentSet, IterationRecord, MatchRule, PipelineConfig, PipelineResult, ProposalMode,
    StopReason,
};
pub use templates::{Template, TemplateError, PROTOSCENE_REFERENCE};
pub use types::*;

/// Non-fatal observation recorded while a run degrades gracefully.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub stage: String,
    pub message: String,
}

impl Note {
    pub fn new(stage: &str, message: impl Into<String>) -> Self {
        Note { stage: stage.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("{module}: malformed response: {detail}")]
    MalformedResponse { module: String, detail: String },
    #[error("implausible canvas dimensions {values:?}")]
    ImplausibleDims { values: Vec<f64> },
    #[error("{parts} part labels but {counts} counts")]
    LengthMismatch { parts: usize, counts: usize },
    #[error("arrangement entry {part:?} lacks field {field:?}")]
    MissingField { part: String, field: String },
    #[error("part {label:?} expects {expected} instances, layout has {found}")]
    CountMismatch { label: String, expected: u32, found: u32 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Arrangement(#[from] ArrangementError),
    #[error(transparent)]
    Backend(#[from] MllmError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("io: {0}")]
    Io(String),
}

impl AgentError {
    pub(crate) fn malformed(module: &str, detail: impl ToString) -> Self {
        AgentError::MalformedResponse { module: module.into(), detail: detail.to_string() }
    }

    /// Errors where asking again with the same prompt may help.
    pub(crate) fn is_response_error(&self) -> bool {
        matches!(
            self,
            AgentError::MalformedResponse { .. }
                | AgentError::ImplausibleDims { .. }
                | AgentError::LengthMismatch { .. }
                | AgentError::MissingField { .. }
                | AgentError::CountMismatch { .. }
                | AgentError::Arrangement(_)
        )
    }
}

impl From<std::io::Error> for AgentError {
    fn from(e: std::io::Error) -> Self {
        AgentError::Io(e.to_string())
    }
}

pub(crate) fn extract_err(module: &str, e: ExtractError) -> AgentError {
    AgentError::malformed(module, e)
}

/// Sends `request`, parses the reply with `parse` and resubmits the same
/// request while the reply is unusable, at most `client.max_retries` times.
pub(crate) fn ask<T>(
    client: &crate::mllm::Client,
    request: &crate::mllm::ChatRequest,
    mut parse: impl FnMut(&str) -> Result<T, AgentError>,
) -> Result<T, AgentError> {
    let mut attempt = 0;
    loop {
        let reply = client.complete(request)?;
        match parse(&reply.text) {
            Ok(v) => return Ok(v),
            Err(e) if e.is_response_error() && attempt < client.max_retries => {
                log::warn!("unusable reply ({e}); resubmitting");
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}
