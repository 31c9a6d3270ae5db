use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use proto3d::agents::{
    refine_code, run_pipeline, write_run_dir, AgentError, AgentSet, Edit, EditSet, PipelineConfig, Query, EDIT_TYPES,
};
use proto3d::dataset::{
    mixup_expand, query_dir_name, render_corpus, summarize_tokens, CorpusItem, CorpusOptions, DatasetError,
    MixupConfig, MixupSource,
};
use proto3d::geomeval::{dense_eval, load_centroids, load_cloud, load_targets, sparse_eval, DenseOptions, EvalError};
use proto3d::mllm::{Backend, Client, LiveBackend, LiveConfig, MockBackend};
use proto3d::render::{
    encode_png, mask_labels_json, render_views, write_camera_metadata, LightRig, RenderError, RenderMode, RigSpec,
    DEFAULT_RADIUS_SCALE,
};
use proto3d::scene::{parse_program, serialize_program, SceneProgram};
use proto3d::math::mix_seed;
use serde_json::json;

use crate::{
    BackendArgs, Cli, Command, ConfigFile, CorpusArgs, DatasetCommand, EditArgs, EvalArgs, GenerateArgs, MixupArgs,
    RenderArgs, Resolution, TokensArgs,
};

pub const EXIT_DESIGNER: u8 = 2;
pub const EXIT_EDIT_FAILSAFE: u8 = 3;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;
pub const EXIT_NO_INPUT: u8 = 66;
pub const EXIT_INTERNAL: u8 = 70;
pub const EXIT_IO: u8 = 74;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
    fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }
    fn data(message: impl Into<String>) -> Self {
        Self::new(EXIT_DATA, message)
    }
    fn io(message: impl Into<String>) -> Self {
        Self::new(EXIT_IO, message)
    }
}

type CmdResult = Result<(), Failure>;

struct Ctx {
    config: ConfigFile,
    seed: Option<u64>,
}

impl Ctx {
    fn pick<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        self.config.pick(flag, key, default).map_err(Failure::usage)
    }

    fn seed(&self) -> Result<u64, Failure> {
        self.pick(self.seed, "seed", 0)
    }
}

pub fn run(cli: Cli) -> CmdResult {
    let config = match &cli.global.config {
        Some(path) if !path.is_file() => {
            return Err(Failure::new(EXIT_NO_INPUT, format!("config file {} not found", path.display())))
        }
        Some(path) => ConfigFile::load(path).map_err(Failure::usage)?,
        None => ConfigFile::default(),
    };
    let ctx = Ctx { config, seed: cli.global.seed };
    let jobs = ctx.pick(cli.global.jobs, "jobs", 0usize)?;
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::new(EXIT_INTERNAL, format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Generate(a) => generate(&ctx, a),
        Command::Render(a) => render(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Dataset(DatasetCommand::Corpus(a)) => corpus(&ctx, a),
        Command::Dataset(DatasetCommand::Mixup(a)) => mixup(&ctx, a),
        Command::Dataset(DatasetCommand::Tokens(a)) => tokens(a),
        Command::Edit(a) => edit(&ctx, a),
    }
}

fn require_file(path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_NO_INPUT, format!("{}: no such file", path.display())))
    }
}

fn read_program(path: &Path) -> Result<SceneProgram, Failure> {
    require_file(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    parse_program(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::io(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))? + "\n";
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build_client(ctx: &Ctx, args: &BackendArgs) -> Result<Client, Failure> {
    let kind = ctx.pick(args.backend.clone(), "backend", "live".to_string())?;
    let backend: Arc<dyn Backend> = match kind.as_str() {
        "mock" => {
            let path = args
                .fixtures
                .clone()
                .or_else(|| ctx.config.path("fixtures"))
                .ok_or_else(|| Failure::usage("--backend mock needs --fixtures"))?;
            require_file(&path)?;
            Arc::new(MockBackend::from_file(&path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?)
        }
        "live" => {
            let mut cfg = LiveConfig::from_env();
            if let Some(e) = args.endpoint.clone().or_else(|| ctx.config.raw("endpoint").map(str::to_string)) {
                cfg.endpoint = e;
            }
            if let Some(m) = args.model.clone().or_else(|| ctx.config.raw("model").map(str::to_string)) {
                cfg.model_id = m;
            }
            if let Some(n) = ctx.config.get::<usize>("max_inflight").map_err(Failure::usage)? {
                cfg.max_inflight = n;
            }
            Arc::new(LiveBackend::new(cfg).map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?)
        }
        other => return Err(Failure::usage(format!("unknown backend {other:?} (live, mock)"))),
    };
    let mut client = Client::new(backend);
    client.max_retries = ctx.pick(args.max_retries, "max_retries", client.max_retries)?;
    client.temperature = ctx.pick(args.temperature, "temperature", client.temperature)?;
    if let Some(m) = args.model.clone().or_else(|| ctx.config.raw("model").map(str::to_string)) {
        client.model_id = m;
    }
    Ok(client)
}

fn agent_failure(e: AgentError) -> Failure {
    match e {
        AgentError::InvalidInput(m) => Failure::usage(m),
        AgentError::Io(m) => Failure::io(m),
        other => Failure::new(EXIT_DESIGNER, other.to_string()),
    }
}

fn generate(ctx: &Ctx, a: GenerateArgs) -> CmdResult {
    let query = Query::new(&a.query).ok_or_else(|| Failure::usage("query must not be empty"))?;
    let d = PipelineConfig::default();
    let mut cfg = PipelineConfig {
        budget: ctx.pick(a.budget, "budget", d.budget)?,
        views_per_iteration: ctx.pick(a.views, "views", d.views_per_iteration)?,
        max_parts: ctx.pick(a.max_parts, "max_parts", d.max_parts)?,
        top_p_predictions: ctx.pick(a.top_p, "top_p", d.top_p_predictions)?,
        temperature: ctx.pick(a.backend.temperature, "temperature", d.temperature)?,
        max_retries: ctx.pick(a.backend.max_retries, "max_retries", d.max_retries)?,
        agents: ctx.pick(a.agents.clone(), "agents", d.agents.to_string())?.parse().map_err(Failure::usage)?,
        proposal_mode: ctx
            .pick(a.proposal_mode.clone(), "proposal_mode", "deterministic".into())?
            .parse()
            .map_err(Failure::usage)?,
        match_rule: ctx.pick(a.match_rule.clone(), "match_rule", "any".to_string())?.parse().map_err(Failure::usage)?,
        strict: a.strict || ctx.config.get::<bool>("strict").map_err(Failure::usage)?.unwrap_or(false),
        resolution: {
            let r = ctx.pick(a.resolution, "resolution", Resolution(d.resolution.0, d.resolution.1))?;
            (r.0, r.1)
        },
        seed: ctx.seed()?,
        ..d
    };
    match ctx.pick(a.pipeline.clone(), "pipeline", "agentic".to_string())?.as_str() {
        "agentic" => {}
        "naive" => cfg.agents = AgentSet { designer: false, coder: false, inspector: false },
        other => return Err(Failure::usage(format!("unknown pipeline {other:?} (agentic, naive)"))),
    }
    cfg.check().map_err(agent_failure)?;
    let client = build_client(ctx, &a.backend)?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(query_dir_name(query.as_str())));

    let result = run_pipeline(&query, &cfg, &client).map_err(agent_failure)?;
    for note in &result.notes {
        log::warn!("[{}] {}", note.stage, note.message);
    }
    write_run_dir(&result, &out).map_err(agent_failure)?;
    eprintln!(
        "{}: {} after {} refinement(s); final program {}",
        query.as_str(),
        result.stop_reason,
        result.refinements(),
        out.join("final.psc").display()
    );
    emit_json(
        &json!({
            "query": query.as_str(),
            "run_dir": out,
            "stop_reason": result.stop_reason.to_string(),
            "refinements": result.refinements(),
            "final_program": out.join("final.psc"),
            "parts": result.final_program.parts.len(),
        }),
        None,
    )
}

fn parse_modes(s: &str) -> Result<Vec<RenderMode>, Failure> {
    let mut modes = Vec::new();
    for name in s.split(',').filter(|n| !n.trim().is_empty()) {
        let m = RenderMode::parse(name).ok_or_else(|| Failure::usage(format!("unknown render mode {name:?}")))?;
        if !modes.contains(&m) {
            modes.push(m);
        }
    }
    if modes.is_empty() {
        return Err(Failure::usage("no render modes given"));
    }
    Ok(modes)
}

fn parse_rig(s: &str) -> Result<RigSpec, Failure> {
    s.parse().map_err(|e: RenderError| Failure::usage(e.to_string()))
}

fn render(ctx: &Ctx, a: RenderArgs) -> CmdResult {
    let program = read_program(&a.program)?;
    let rig = parse_rig(&ctx.pick(a.rig.clone(), "rig", "icosphere:1".to_string())?)?;
    let modes = parse_modes(&ctx.pick(a.modes.clone(), "modes", "shaded".to_string())?)?;
    let res = ctx.pick(a.resolution, "resolution", Resolution(384, 384))?;
    let seed = ctx.seed()?;
    let out = a.out.clone().unwrap_or_else(|| {
        let stem = a.program.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        a.program.with_file_name(format!("{stem}_renders"))
    });
    let render_err = |e: RenderError| Failure::data(e.to_string());
    let cameras: Vec<_> =
        rig.cameras(&program, seed).map_err(render_err)?.into_iter().map(|c| c.with_resolution(res.0, res.1)).collect();
    let lights = LightRig::random(mix_seed(seed, 0x1000));
    std::fs::create_dir_all(&out).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;

    use rayon::prelude::*;
    let files: Vec<Vec<(String, Vec<u8>)>> = cameras
        .par_iter()
        .enumerate()
        .map(|(i, cam)| {
            let views = render_views(&program, std::slice::from_ref(cam), &lights, &modes)?;
            let mut files = Vec::new();
            for v in views {
                let name = format!("view_{i}_{}", v.mode.name());
                files.push((format!("{name}.png"), encode_png(&v.image)?));
                if v.mode == RenderMode::Mask {
                    files.push((format!("{name}.json"), mask_labels_json(&program).into_bytes()));
                }
            }
            Ok(files)
        })
        .collect::<Result<_, RenderError>>()
        .map_err(render_err)?;
    let mut images = 0;
    for (name, bytes) in files.iter().flatten() {
        std::fs::write(out.join(name), bytes).map_err(|e| Failure::io(format!("{name}: {e}")))?;
        images += usize::from(name.ends_with(".png"));
    }
    write_camera_metadata(&out.join("cameras.json"), &cameras, seed).map_err(|e| Failure::io(e.to_string()))?;
    eprintln!("wrote {images} images for {} views to {}", cameras.len(), out.display());
    Ok(())
}

fn eval_failure(e: EvalError) -> Failure {
    match e {
        EvalError::Io(m) => Failure::io(m),
        EvalError::InvalidArgument(m) => Failure::usage(m),
        other => Failure::data(other.to_string()),
    }
}

fn eval(ctx: &Ctx, a: EvalArgs) -> CmdResult {
    if !a.sparse && !a.dense {
        return Err(Failure::usage("choose --sparse and/or --dense"));
    }
    require_file(&a.proto)?;
    let mut report = serde_json::Map::new();
    if a.sparse {
        let dir = a.targets.as_ref().ok_or_else(|| Failure::usage("--sparse needs --targets <dir>"))?;
        if !dir.is_dir() {
            return Err(Failure::new(EXIT_NO_INPUT, format!("{}: no such directory", dir.display())));
        }
        let proto = load_centroids(&a.proto).map_err(eval_failure)?;
        let targets = load_targets(dir).map_err(eval_failure)?;
        let client = if a.no_backend { None } else { Some(build_client(ctx, &a.backend)?) };
        let r = sparse_eval(&proto, &targets, client.as_ref()).map_err(eval_failure)?;
        for s in &r.skipped {
            log::warn!("target {} skipped: {}", s.target, s.reason);
        }
        report.insert("sparse".into(), serde_json::to_value(&r).map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?);
    }
    if a.dense {
        let path = a.target.as_ref().ok_or_else(|| Failure::usage("--dense needs --target <cloud>"))?;
        require_file(path)?;
        let program = read_program(&a.proto)?;
        let target = load_cloud(path).map_err(eval_failure)?.cloud;
        let d = DenseOptions::default();
        let opts = DenseOptions {
            n_samples: ctx.pick(a.samples, "samples", d.n_samples)?,
            seed: ctx.seed()?,
            icp_iters: ctx.pick(a.icp_iters, "icp_iters", d.icp_iters)?,
            icp_tol: ctx.pick(a.icp_tol, "icp_tol", d.icp_tol)?,
            squared_chamfer: a.squared_chamfer || ctx.config.get::<bool>("squared_chamfer").map_err(Failure::usage)?.unwrap_or(false),
        };
        let r = dense_eval(&program, &target, &opts).map_err(eval_failure)?;
        report.insert("dense".into(), serde_json::to_value(&r).map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?);
    }
    emit_json(&serde_json::Value::Object(report), a.out.as_deref())
}

/// `(query, program)` for every input: a `.psc` file (query = stem), a run
/// directory (query from `run.json`, program `final.psc`) or a directory of
/// `.psc` files.
fn collect_programs(inputs: &[PathBuf]) -> Result<Vec<(String, PathBuf)>, Failure> {
    let mut out = Vec::new();
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    for input in inputs {
        if input.is_file() {
            out.push((stem(input), input.clone()));
        } else if input.join("run.json").is_file() && input.join("final.psc").is_file() {
            let run: serde_json::Value = std::fs::read_to_string(input.join("run.json"))
                .ok()
                .and_then(|t| serde_json::from_str(&t).ok())
                .unwrap_or_default();
            let query = run.get("query").and_then(|q| q.as_str()).map_or_else(|| stem(input), str::to_string);
            out.push((query, input.join("final.psc")));
        } else if input.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|e| Failure::io(format!("{}: {e}", input.display())))?
                .flatten()
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|e| e == "psc"))
                .collect();
            files.sort();
            out.extend(files.into_iter().map(|p| (stem(&p), p)));
        } else {
            return Err(Failure::new(EXIT_NO_INPUT, format!("{}: no such file or directory", input.display())));
        }
    }
    if out.is_empty() {
        return Err(Failure::new(EXIT_NO_INPUT, "no programs found"));
    }
    Ok(out)
}

fn dataset_failure(e: DatasetError) -> Failure {
    match e {
        DatasetError::EmptySource(_) | DatasetError::MissingTranscript(_) => Failure::new(EXIT_NO_INPUT, e.to_string()),
        DatasetError::InvalidConfig(m) => Failure::usage(m),
        DatasetError::Format(m) => Failure::data(m),
        other => Failure::io(other.to_string()),
    }
}

fn corpus(ctx: &Ctx, a: CorpusArgs) -> CmdResult {
    let seed = ctx.seed()?;
    let mut items = Vec::new();
    for (query, path) in collect_programs(&a.inputs)? {
        items.push(CorpusItem { query, seed, program: read_program(&path)? });
    }
    let d = CorpusOptions::default();
    let res = ctx.pick(a.resolution, "resolution", Resolution(d.resolution.0, d.resolution.1))?;
    let opts = CorpusOptions {
        rig: parse_rig(&ctx.pick(a.rig.clone(), "rig", format!("icosphere:0:{DEFAULT_RADIUS_SCALE}"))?)?,
        modes: parse_modes(&ctx.pick(a.modes.clone(), "modes", "shaded,depth,mask".to_string())?)?,
        resolution: (res.0, res.1),
    };
    let m = render_corpus(&items, &opts, &a.out).map_err(dataset_failure)?;
    for f in &m.failures {
        eprintln!("render failure: {} (seed {}): {}", f.query, f.seed, f.error);
    }
    eprintln!("{} programs rendered, {} failed; manifest at {}", m.entries.len(), m.failures.len(), a.out.join("manifest.json").display());
    Ok(())
}

fn mixup(ctx: &Ctx, a: MixupArgs) -> CmdResult {
    let mut sources = Vec::new();
    for s in &a.sources {
        let (dir, p) = s.rsplit_once(':').ok_or_else(|| Failure::usage(format!("--source {s:?}: expected <dir>:<probability>")))?;
        let probability = p.parse().map_err(|_| Failure::usage(format!("--source {s:?}: bad probability")))?;
        let dir = PathBuf::from(dir);
        if !dir.is_dir() {
            return Err(Failure::new(EXIT_NO_INPUT, format!("{}: no such directory", dir.display())));
        }
        sources.push(MixupSource { dir, probability });
    }
    let mut cfg = MixupConfig::new(sources);
    cfg.n_out = a.n_out;
    cfg.dirichlet_alpha = a.alpha;
    cfg.seed = ctx.seed()?;
    let res = ctx.pick(a.resolution, "resolution", Resolution(cfg.resolution.0, cfg.resolution.1))?;
    cfg.resolution = (res.0, res.1);
    if let Some(w) = &a.weights {
        let (w1, w2) = w.split_once(',').ok_or_else(|| Failure::usage("--weights expects w1,w2"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| Failure::usage(format!("bad weight {v:?}")));
        cfg.fixed_weights = Some((parse(w1)?, parse(w2)?));
    }
    let m = mixup_expand(&cfg, &a.out).map_err(dataset_failure)?;
    eprintln!("wrote {} images to {}", m.records.len(), a.out.display());
    Ok(())
}

fn tokens(a: TokensArgs) -> CmdResult {
    for r in &a.runs {
        if !r.is_dir() {
            return Err(Failure::new(EXIT_NO_INPUT, format!("{}: no such directory", r.display())));
        }
    }
    let report = summarize_tokens(&a.runs).map_err(dataset_failure)?;
    emit_json(&serde_json::to_value(&report).map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?, a.out.as_deref())
}

/// The user's command as a single edit; the type is the first known edit verb
/// in it, if any.
pub fn command_edit(command: &str) -> Edit {
    let lower = command.to_lowercase();
    let edit_type = lower
        .split(|c: char| !c.is_alphanumeric())
        .find(|w| EDIT_TYPES.contains(w))
        .unwrap_or("modify")
        .to_string();
    Edit { aspect: "user request".into(), edit_type, command: command.trim().to_string() }
}

fn edit(ctx: &Ctx, a: EditArgs) -> CmdResult {
    if a.command.trim().is_empty() {
        return Err(Failure::usage("edit command must not be empty"));
    }
    let program = read_program(&a.program)?;
    let stem = a.program.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let query = Query::new(a.query.as_deref().unwrap_or(&stem)).ok_or_else(|| Failure::usage("empty query"))?;
    let client = build_client(ctx, &a.backend)?;
    let edits = EditSet { edits: vec![command_edit(&a.command)] };
    let outcome = refine_code(&query, &program, Some(&edits), 0, &client).map_err(agent_failure)?;
    let out = a.out.clone().unwrap_or_else(|| a.program.with_file_name(format!("{stem}.edited.psc")));
    write_text(&out, &serialize_program(&outcome.program))?;
    if outcome.fell_back {
        let why = outcome.note.map(|n| n.message).unwrap_or_default();
        return Err(Failure::new(
            EXIT_EDIT_FAILSAFE,
            format!("refiner output unusable ({why}); program left unchanged in {}", out.display()),
        ));
    }
    let changed: BTreeMap<&str, bool> = outcome
        .program
        .parts
        .iter()
        .map(|p| (p.label.as_str(), program.part(&p.label) != Some(p)))
        .collect();
    eprintln!("wrote {}", out.display());
    emit_json(&json!({ "output": out, "changed_parts": changed.iter().filter(|c| *c.1).map(|c| *c.0).collect::<Vec<_>>() }), None)
}
