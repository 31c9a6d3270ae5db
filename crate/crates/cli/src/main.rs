//! `proto3d`: generate prototypes, render programs, evaluate them and build
//! datasets.
//!
//! Exit codes: 0 success, 2 designer-stage failure, 3 edit fell back to the
//! input program, 64 usage error, 65 malformed data, 66 missing input,
//! 70 internal error, 74 I/O failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{ConfigFile, Resolution};

#[derive(Debug, Parser)]
#[command(name = "proto3d", version, about = "Agentic text-to-3D prototype pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Key-value config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for rendering and evaluation.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Args, Default)]
pub struct BackendArgs {
    /// `live` (chat-completions endpoint) or `mock` (fixture replay).
    #[arg(long)]
    pub backend: Option<String>,
    /// Fixture file for the mock backend.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the agent pipeline for one query and write a run directory.
    Generate(GenerateArgs),
    /// Render a ProtoScene program from a camera rig.
    Render(RenderArgs),
    /// Sparse part-arrangement and dense point-cloud evaluation.
    Eval(EvalArgs),
    /// Corpus rendering, mixup expansion and token reports.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Apply one natural-language edit to a program.
    Edit(EditArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub query: String,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Run directory (default `runs/<query>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `agentic` or `naive` (single-prompt baseline).
    #[arg(long)]
    pub pipeline: Option<String>,
    /// Comma-separated subset of designer,coder,inspector.
    #[arg(long)]
    pub agents: Option<String>,
    #[arg(long)]
    pub budget: Option<u32>,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub max_parts: Option<usize>,
    #[arg(long)]
    pub top_p: Option<usize>,
    /// `deterministic` or `mllm`.
    #[arg(long)]
    pub proposal_mode: Option<String>,
    /// `any` or `top1`.
    #[arg(long)]
    pub match_rule: Option<String>,
    /// Treat designer inconsistencies as errors.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub resolution: Option<Resolution>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub program: PathBuf,
    /// `icosphere:<subdiv>[:<scale>]`, `hemisphere:<n>` or `fibonacci:<n>[:<scale>]`.
    #[arg(long)]
    pub rig: Option<String>,
    /// Comma-separated subset of shaded,albedo,depth,mask.
    #[arg(long)]
    pub modes: Option<String>,
    #[arg(long)]
    pub resolution: Option<Resolution>,
    /// Output directory (default `<program stem>_renders` beside the input).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub sparse: bool,
    #[arg(long)]
    pub dense: bool,
    /// Prototype program (`.psc`) or centroid file.
    #[arg(long)]
    pub proto: PathBuf,
    /// Directory of sparse targets.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Dense target point cloud.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub icp_iters: Option<usize>,
    #[arg(long)]
    pub icp_tol: Option<f64>,
    /// Average squared instead of plain nearest-neighbour distances.
    #[arg(long)]
    pub squared_chamfer: bool,
    /// Map part labels by name instead of asking the backend.
    #[arg(long)]
    pub no_backend: bool,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Render programs into `<out>/<query>/<seed>/view_<i>_<mode>.png`.
    Corpus(CorpusArgs),
    /// Dirichlet mixup of two images per output.
    Mixup(MixupArgs),
    /// Token totals per query and per image over run directories.
    Tokens(TokensArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// `.psc` files, run directories or directories of `.psc` files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub rig: Option<String>,
    #[arg(long)]
    pub modes: Option<String>,
    #[arg(long)]
    pub resolution: Option<Resolution>,
}

#[derive(Debug, Args)]
pub struct MixupArgs {
    /// `<dir>:<probability>`, repeatable.
    #[arg(long = "source", required = true)]
    pub sources: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = proto3d::dataset::DEFAULT_N_OUT)]
    pub n_out: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub resolution: Option<Resolution>,
    /// Fixed `w1,w2` instead of sampled weights.
    #[arg(long)]
    pub weights: Option<String>,
}

#[derive(Debug, Args)]
pub struct TokensArgs {
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    pub program: PathBuf,
    pub command: String,
    /// Object category (default: the program's file stem).
    #[arg(long)]
    pub query: Option<String>,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Output path (default `<stem>.edited.psc` beside the input).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("proto3d: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
