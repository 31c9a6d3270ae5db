//! Dataset tools: batch rendering of prototype corpora (shaded, albedo, depth
//! and mask images with camera and label sidecars), Dirichlet mixup expansion
//! of image sets, and per-image token accounting over pipeline runs.

mod corpus;
mod mixup;
mod tokens;

use std::path::PathBuf;

use thiserror::Error;

use crate::render::RenderError;

pub use corpus::{render_corpus, scan_files, CorpusEntry, CorpusItem, CorpusManifest, CorpusOptions, RenderFailure};
pub use mixup::{
    blend, dirichlet_pair, list_images, mixup_expand, plan_mixup, MixupConfig, MixupDraw, MixupManifest, MixupSource,
    DEFAULT_N_OUT,
};
pub use tokens::{summarize_tokens, QueryTokens, RunTokens, TokenReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("source {0} contains no images")]
    EmptySource(PathBuf),
    #[error("no transcript in {0}")]
    MissingTranscript(PathBuf),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("write failed: {0}")]
    WriteFailure(String),
    #[error("data format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Render(#[from] RenderError),
}

impl From<std::io::Error> for DatasetError {
    fn from(e: std::io::Error) -> Self {
        DatasetError::Io(e.to_string())
    }
}

/// Directory-safe form of a query: alphanumerics kept, everything else `_`.
pub fn query_dir_name(query: &str) -> String {
    let s: String = query.trim().chars().map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' }).collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}
