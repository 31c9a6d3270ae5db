use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    decompose, identify, metricize, prediction_matches, proposal_to_code, propose_arrangement, recommend_edits,
    refine_code, run_naive, AgentError, Arrangement, Canvas, EditSet, Note, PartDecomposition, Query,
};
use crate::math::mix_seed;
use crate::mllm::{Client, Transcript, DEFAULT_TEMPERATURE, MAX_IMAGES};
use crate::render::{
    render_views, upper_hemisphere_cameras, write_image, LightRig, RenderError, RenderMode, RenderSet, DEFAULT_RESOLUTION,
};
use crate::scene::{serialize_program, SceneProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalMode {
    #[default]
    Deterministic,
    Mllm,
}

impl FromStr for ProposalMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "deterministic" => Ok(ProposalMode::Deterministic),
            "mllm" => Ok(ProposalMode::Mllm),
            other => Err(format!("unknown proposal mode {other:?} (deterministic, mllm)")),
        }
    }
}

/// How identifier guesses are compared with the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    /// Any of the returned guesses.
    #[default]
    Any,
    /// Only the first guess.
    Top1,
}

impl FromStr for MatchRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "any" => Ok(MatchRule::Any),
            "top1" => Ok(MatchRule::Top1),
            other => Err(format!("unknown match rule {other:?} (any, top1)")),
        }
    }
}

/// Which agents take part in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSet {
    pub designer: bool,
    pub coder: bool,
    pub inspector: bool,
}

impl Default for AgentSet {
    fn default() -> Self {
        AgentSet { designer: true, coder: true, inspector: true }
    }
}

impl FromStr for AgentSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let mut set = AgentSet { designer: false, coder: false, inspector: false };
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "designer" => set.designer = true,
                "coder" => set.coder = true,
                "inspector" => set.inspector = true,
                other => return Err(format!("unknown agent {other:?} (designer, coder, inspector)")),
            }
        }
        Ok(set)
    }
}

impl fmt::Display for AgentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = [(self.designer, "designer"), (self.coder, "coder"), (self.inspector, "inspector")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Refinement rounds allowed after the first program.
    pub budget: u32,
    pub views_per_iteration: usize,
    pub max_parts: usize,
    pub top_p_predictions: usize,
    pub temperature: f64,
    pub max_retries: u32,
    pub agents: AgentSet,
    pub proposal_mode: ProposalMode,
    pub match_rule: MatchRule,
    /// Fail on designer inconsistencies instead of noting them.
    pub strict: bool,
    pub resolution: (u32, u32),
    pub language: String,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            budget: 3,
            views_per_iteration: 3,
            max_parts: 8,
            top_p_predictions: 3,
            temperature: DEFAULT_TEMPERATURE,
            max_retries: crate::mllm::DEFAULT_MAX_RETRIES,
            agents: AgentSet::default(),
            proposal_mode: ProposalMode::Deterministic,
            match_rule: MatchRule::Any,
            strict: false,
            resolution: DEFAULT_RESOLUTION,
            language: "protoscene".into(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidInput(m.into()));
        if self.views_per_iteration == 0 || self.views_per_iteration > MAX_IMAGES {
            return bad("views_per_iteration must be between 1 and 3");
        }
        if self.max_parts == 0 || self.top_p_predictions == 0 {
            return bad("max_parts and top_p_predictions must be at least 1");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must lie in [0, 2]");
        }
        if self.agents.inspector && !self.agents.coder {
            return bad("the inspector agent requires the coder agent");
        }
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return bad("resolution must be positive");
        }
        if self.language != "protoscene" {
            return bad("the only supported language is protoscene");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Identified,
    BudgetExhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Identified => "identified",
            StopReason::BudgetExhausted => "budget_exhausted",
        })
    }
}

/// Program `k`, its renders, what the identifier saw in them and the edits
/// recommended from them (which drive program `k + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: u32,
    pub program: SceneProgram,
    pub renders: RenderSet,
    pub predictions: Vec<String>,
    pub matched: bool,
    pub edits: Option<EditSet>,
    pub refine_fell_back: bool,
}

#[derive(Clone)]
pub struct PipelineResult {
    pub query: Query,
    pub config: PipelineConfig,
    pub canvas: Option<Canvas>,
    pub decomposition: Option<PartDecomposition>,
    pub arrangement: Option<Arrangement>,
    pub coarse_program: SceneProgram,
    pub final_program: SceneProgram,
    pub iterations: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    pub notes: Vec<Note>,
    pub transcript: Arc<Transcript>,
}

impl PipelineResult {
    /// Refinement rounds run after the first program.
    pub fn refinements(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }
}

impl fmt::Debug for PipelineResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PipelineResult")
            .field("query", &self.query)
            .field("stop_reason", &self.stop_reason)
            .field("iterations", &self.iterations.len())
            .field("final_parts", &self.final_program.labels())
            .finish()
    }
}

fn render_iteration(program: &SceneProgram, cfg: &PipelineConfig, k: u32) -> Result<RenderSet, RenderError> {
    let (w, h) = cfg.resolution;
    let cameras: Vec<_> = upper_hemisphere_cameras(program, cfg.views_per_iteration, mix_seed(cfg.seed, k as u64))?
        .into_iter()
        .map(|c| c.with_resolution(w, h))
        .collect();
    let lights = LightRig::random(mix_seed(cfg.seed, 0x1000 + k as u64));
    let views = render_views(program, &cameras, &lights, &[RenderMode::Shaded])?;
    Ok(RenderSet { iteration: k as usize, views })
}

/// Runs designer, coder and inspector in the refinement loop. The last
/// program is returned whether or not the identifier ever recognised it;
/// only designer-stage failures are fatal.
pub fn run_pipeline(q: &Query, cfg: &PipelineConfig, client: &Client) -> Result<PipelineResult, AgentError> {
    cfg.check()?;
    let mut client = client.clone();
    client.temperature = cfg.temperature;
    client.max_retries = cfg.max_retries;
    let client = &client;
    let mut notes = Vec::new();

    let (canvas, decomposition, arrangement, coarse) = if cfg.agents.designer {
        let canvas = metricize(q, client)?;
        let d = decompose(q, client, cfg.max_parts)?;
        let a = propose_arrangement(q, &d, &canvas, client, cfg.strict, &mut notes)?;
        let coarse = proposal_to_code(q, &a, cfg.proposal_mode, client)?;
        (Some(canvas), Some(d), Some(a), coarse)
    } else {
        (None, None, None, run_naive(q, client)?)
    };

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut program = coarse.clone();
    let mut edits: Option<EditSet> = None;
    let mut stop_reason = StopReason::BudgetExhausted;
    let rounds = if cfg.agents.inspector { cfg.budget } else { 0 };

    for k in 0..=rounds {
        let mut fell_back = false;
        if cfg.agents.coder {
            let out = refine_code(q, &program, edits.as_ref(), k, client)?;
            fell_back = out.fell_back;
            notes.extend(out.note);
            program = out.program;
        }
        let renders = render_iteration(&program, cfg, k)?;
        let mut record = IterationRecord {
            k,
            program: program.clone(),
            renders,
            predictions: Vec::new(),
            matched: false,
            edits: None,
            refine_fell_back: fell_back,
        };
        if !cfg.agents.inspector {
            iterations.push(record);
            break;
        }
        record.predictions = match identify(q, &record.renders, k, cfg.top_p_predictions, client) {
            Ok(p) => p,
            Err(e @ (AgentError::Render(_) | AgentError::Template(_))) => return Err(e),
            Err(e) => {
                notes.push(Note::new("identifier", format!("iteration {k}: {e}; treated as no prediction")));
                Vec::new()
            }
        };
        record.matched = prediction_matches(q, &record.predictions, cfg.match_rule);
        if record.matched {
            stop_reason = StopReason::Identified;
            iterations.push(record);
            break;
        }
        if k < rounds {
            let e = match recommend_edits(q, &record.renders, &record.predictions, k, client, &mut notes) {
                Ok(e) => e,
                Err(e @ (AgentError::Render(_) | AgentError::Template(_))) => return Err(e),
                Err(e) => {
                    notes.push(Note::new("edit_recommender", format!("iteration {k}: {e}; refining without edits")));
                    EditSet::default()
                }
            };
            record.edits = Some(e.clone());
            edits = Some(e);
        }
        iterations.push(record);
    }

    Ok(PipelineResult {
        query: q.clone(),
        config: cfg.clone(),
        canvas,
        decomposition,
        arrangement,
        coarse_program: coarse,
        final_program: program,
        iterations,
        stop_reason,
        notes,
        transcript: client.transcript.clone(),
    })
}

/// Writes `run.json`, `coarse.psc`, `iter_<k>/program.psc`,
/// `iter_<k>/view_<j>.png`, `final.psc` and `transcript.jsonl` under `dir`.
pub fn write_run_dir(result: &PipelineResult, dir: &Path) -> Result<(), AgentError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("coarse.psc"), serialize_program(&result.coarse_program))?;
    let mut iterations = Vec::new();
    for it in &result.iterations {
        let sub = format!("iter_{}", it.k);
        std::fs::create_dir_all(dir.join(&sub))?;
        std::fs::write(dir.join(&sub).join("program.psc"), serialize_program(&it.program))?;
        let mut views = Vec::new();
        for (j, v) in it.renders.views.iter().enumerate() {
            let file = format!("{sub}/view_{j}.png");
            write_image(&dir.join(&file), &v.image)?;
            views.push(json!({
                "file": file,
                "mode": v.mode.name(),
                "sha256": v.image.content_hash(),
                "camera_position": v.camera.position.iter().collect::<Vec<_>>(),
            }));
        }
        iterations.push(json!({
            "k": it.k,
            "program": format!("{sub}/program.psc"),
            "views": views,
            "predictions": it.predictions,
            "matched": it.matched,
            "edits": it.edits,
            "refine_fell_back": it.refine_fell_back,
        }));
    }
    std::fs::write(dir.join("final.psc"), serialize_program(&result.final_program))?;
    result.transcript.write_jsonl(&dir.join("transcript.jsonl"))?;
    let run = json!({
        "query": result.query,
        "stop_reason": result.stop_reason.to_string(),
        "refinements": result.refinements(),
        "config": result.config,
        "canvas": result.canvas,
        "decomposition": result.decomposition,
        "arrangement": result.arrangement,
        "notes": result.notes,
        "iterations": iterations,
        "coarse_program": "coarse.psc",
        "final_program": "final.psc",
        "transcript": "transcript.jsonl",
        "images": result.iterations.iter().map(|i| i.renders.views.len()).sum::<usize>(),
    });
    std::fs::write(dir.join("run.json"), serde_json::to_string_pretty(&run).unwrap_or_default() + "\n")?;
    Ok(())
}
