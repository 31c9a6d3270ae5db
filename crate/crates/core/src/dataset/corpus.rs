use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{query_dir_name, DatasetError};
use crate::math::mix_seed;
use crate::render::{encode_png, mask_labels_json, render_views, CameraRecord, LightRig, RenderMode, RigSpec};
use crate::scene::{serialize_program, validate, SceneProgram};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub query: String,
    pub seed: u64,
    pub program: SceneProgram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusOptions {
    pub rig: RigSpec,
    pub modes: Vec<RenderMode>,
    pub resolution: (u32, u32),
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            rig: RigSpec::Icosphere { subdivision: 0, radius_scale: crate::render::DEFAULT_RADIUS_SCALE },
            modes: vec![RenderMode::Shaded, RenderMode::Depth, RenderMode::Mask],
            resolution: crate::render::DEFAULT_RESOLUTION,
        }
    }
}

/// Paths are relative to the corpus root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub query: String,
    pub seed: u64,
    pub program: String,
    pub cameras: String,
    /// Mode name to one file per view.
    pub renders: BTreeMap<String, Vec<String>>,
    pub mask_labels: Vec<String>,
}

impl CorpusEntry {
    pub fn files(&self) -> impl Iterator<Item = &String> {
        [&self.program, &self.cameras].into_iter().chain(self.renders.values().flatten()).chain(&self.mask_labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderFailure {
    pub query: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub config: CorpusOptions,
    pub entries: Vec<CorpusEntry>,
    pub failures: Vec<RenderFailure>,
}

impl CorpusManifest {
    pub fn files(&self) -> BTreeSet<String> {
        self.entries.iter().flat_map(|e| e.files().cloned()).collect()
    }
}

fn render_item(item: &CorpusItem, opts: &CorpusOptions) -> Result<Vec<(String, Vec<u8>)>, String> {
    if let Some(d) = validate(&item.program).first() {
        return Err(format!("invalid program: {d}"));
    }
    let (w, h) = opts.resolution;
    let cameras: Vec<_> = opts
        .rig
        .cameras(&item.program, item.seed)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|c| c.with_resolution(w, h))
        .collect();
    let lights = LightRig::random(mix_seed(item.seed, 0x1000));
    let views = render_views(&item.program, &cameras, &lights, &opts.modes).map_err(|e| e.to_string())?;

    let mut files = vec![("program.psc".to_string(), serialize_program(&item.program).into_bytes())];
    let records: Vec<CameraRecord> = cameras.iter().enumerate().map(|(i, c)| CameraRecord::new(i, c, item.seed)).collect();
    files.push(("cameras.json".into(), serde_json::to_vec_pretty(&records).map_err(|e| e.to_string())?));
    let labels = mask_labels_json(&item.program);
    for (k, view) in views.iter().enumerate() {
        let i = k / opts.modes.len();
        let name = format!("view_{i}_{}", view.mode.name());
        files.push((format!("{name}.png"), encode_png(&view.image).map_err(|e| e.to_string())?));
        if view.mode == RenderMode::Mask {
            files.push((format!("{name}.json"), labels.clone().into_bytes()));
        }
    }
    Ok(files)
}

fn write_item(dir: &Path, files: &[(String, Vec<u8>)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in files {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

/// Renders every item under `<out>/<query>/<seed>/` as `view_<i>_<mode>.png`,
/// with a label-map JSON next to every mask, `cameras.json` and the program.
/// An item that fails is removed and listed under `failures`; the manifest is
/// written last as `manifest.json`.
pub fn render_corpus(items: &[CorpusItem], opts: &CorpusOptions, out_dir: &Path) -> Result<CorpusManifest, DatasetError> {
    if items.is_empty() {
        return Err(DatasetError::InvalidConfig("no programs to render".into()));
    }
    if opts.modes.is_empty() {
        return Err(DatasetError::InvalidConfig("no render modes selected".into()));
    }
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert((query_dir_name(&item.query), item.seed)) {
            return Err(DatasetError::InvalidConfig(format!("duplicate entry ({:?}, {})", item.query, item.seed)));
        }
    }
    std::fs::create_dir_all(out_dir)?;

    let outcomes: Vec<Result<CorpusEntry, RenderFailure>> = items
        .par_iter()
        .map(|item| {
            let rel = PathBuf::from(query_dir_name(&item.query)).join(item.seed.to_string());
            let fail = |error: String| RenderFailure { query: item.query.clone(), seed: item.seed, error };
            let files = render_item(item, opts).map_err(fail)?;
            let dir = out_dir.join(&rel);
            if let Err(e) = write_item(&dir, &files) {
                let _ = std::fs::remove_dir_all(&dir);
                return Err(fail(format!("write failed: {e}")));
            }
            let path = |name: &str| rel.join(name).to_string_lossy().replace('\\', "/");
            let mut renders: BTreeMap<String, Vec<String>> = BTreeMap::new();
            let mut mask_labels = Vec::new();
            for (name, _) in &files {
                if let Some(stem) = name.strip_suffix(".png") {
                    let mode = stem.rsplit('_').next().unwrap_or("").to_string();
                    renders.entry(mode).or_default().push(path(name));
                } else if name.starts_with("view_") {
                    mask_labels.push(path(name));
                }
            }
            Ok(CorpusEntry {
                query: item.query.clone(),
                seed: item.seed,
                program: path("program.psc"),
                cameras: path("cameras.json"),
                renders,
                mask_labels,
            })
        })
        .collect();

    let mut manifest = CorpusManifest { config: opts.clone(), entries: Vec::new(), failures: Vec::new() };
    for outcome in outcomes {
        match outcome {
            Ok(e) => manifest.entries.push(e),
            Err(f) => {
                log::warn!("render failure for {:?} (seed {}): {}", f.query, f.seed, f.error);
                manifest.failures.push(f);
            }
        }
    }
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| DatasetError::WriteFailure(e.to_string()))?;
    std::fs::write(out_dir.join("manifest.json"), text + "\n").map_err(|e| DatasetError::WriteFailure(e.to_string()))?;
    Ok(manifest)
}

/// Every file under `root` except the top-level manifest, relative and `/`-separated.
pub fn scan_files(root: &Path) -> std::io::Result<BTreeSet<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeSet<String>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else if let Ok(rel) = path.strip_prefix(root) {
                out.insert(rel.to_string_lossy().replace('\\', "/"));
            }
        }
        Ok(())
    }
    let mut out = BTreeSet::new();
    walk(root, root, &mut out)?;
    out.remove("manifest.json");
    Ok(out)
}
