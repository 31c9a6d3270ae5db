use std::path::{Path, PathBuf};

use image::imageops::{resize, FilterType};
use image::{ImageBuffer, Rgb, Rgb32FImage};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::math::{rng_for, unit_f64};

pub const DEFAULT_N_OUT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixupSource {
    pub dir: PathBuf,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixupConfig {
    pub sources: Vec<MixupSource>,
    pub n_out: usize,
    pub resolution: (u32, u32),
    pub dirichlet_alpha: f64,
    pub seed: u64,
    /// Use these weights for every output instead of sampling them.
    pub fixed_weights: Option<(f64, f64)>,
}

impl MixupConfig {
    pub fn new(sources: Vec<MixupSource>) -> Self {
        MixupConfig {
            sources,
            n_out: DEFAULT_N_OUT,
            resolution: crate::render::DEFAULT_RESOLUTION,
            dirichlet_alpha: 1.0,
            seed: 0,
            fixed_weights: None,
        }
    }

    pub fn check(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidConfig(m));
        if self.sources.is_empty() {
            return bad("no sources".into());
        }
        if self.sources.iter().any(|s| !(s.probability >= 0.0 && s.probability.is_finite())) {
            return bad("source probabilities must be non-negative".into());
        }
        let total: f64 = self.sources.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("source probabilities sum to {total}, not 1"));
        }
        if self.n_out == 0 {
            return bad("n_out must be at least 1".into());
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return bad(format!("dirichlet_alpha must be positive, got {}", self.dirichlet_alpha));
        }
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return bad("resolution must be positive".into());
        }
        if let Some((a, b)) = self.fixed_weights {
            if !(a >= 0.0 && b >= 0.0 && ((a + b) - 1.0).abs() <= 1e-12) {
                return bad(format!("fixed weights ({a}, {b}) must be non-negative and sum to 1"));
            }
        }
        Ok(())
    }
}

/// One output's sampled ingredients: `(source, file)` per input and the weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixupDraw {
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub w1: f64,
    pub w2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixupRecord {
    pub index: usize,
    pub file: String,
    pub first: String,
    pub second: String,
    pub w1: f64,
    pub w2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixupManifest {
    pub config: MixupConfig,
    pub records: Vec<MixupRecord>,
}

/// `(w₁, 1 − w₁)` with `w₁ = g₁ / (g₁ + g₂)`, `gᵢ ~ Gamma(α, 1)`.
pub fn dirichlet_pair(alpha: f64, rng: &mut impl Rng) -> (f64, f64) {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    loop {
        let (g1, g2): (f64, f64) = (gamma.sample(rng), gamma.sample(rng));
        let sum = g1 + g2;
        if sum > 0.0 && sum.is_finite() {
            let w1 = g1 / sum;
            return (w1, 1.0 - w1);
        }
    }
}

fn pick_source(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u = unit_f64(rng);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// The draws `mixup_expand` would make, given the file count of each source.
/// Item `i` uses its own stream so draws do not depend on scheduling.
pub fn plan_mixup(cfg: &MixupConfig, files_per_source: &[usize]) -> Vec<MixupDraw> {
    let probs: Vec<f64> = cfg.sources.iter().map(|s| s.probability).collect();
    (0..cfg.n_out)
        .map(|i| {
            let mut rng = rng_for(cfg.seed, i as u64);
            let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
                let s = pick_source(&probs, rng);
                (s, rng.random_range(0..files_per_source[s].max(1)))
            };
            let first = pick(&mut rng);
            let second = pick(&mut rng);
            let (w1, w2) = cfg.fixed_weights.unwrap_or_else(|| dirichlet_pair(cfg.dirichlet_alpha, &mut rng));
            MixupDraw { first, second, w1, w2 }
        })
        .collect()
}

/// PNG files under `dir`, recursively, in sorted order.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, &mut out).map_err(|e| DatasetError::Io(format!("{}: {e}", dir.display())))?;
    out.sort();
    Ok(out)
}

fn load_resized(path: &Path, (w, h): (u32, u32)) -> Result<Rgb32FImage, DatasetError> {
    let img = image::open(path).map_err(|e| DatasetError::Format(format!("{}: {e}", path.display())))?.to_rgb32f();
    Ok(if img.dimensions() == (w, h) { img } else { resize(&img, w, h, FilterType::Triangle) })
}

/// Per-channel `w1·a + w2·b` in linear float space, quantized to 8 bits.
pub fn blend(a: &Rgb32FImage, b: &Rgb32FImage, w1: f64, w2: f64) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
    let raw = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&x, &y)| ((w1 * x as f64 + w2 * y as f64).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    ImageBuffer::from_raw(a.width(), a.height(), raw).expect("same-sized inputs")
}

/// Writes `n_out` two-image blends as `mix_{index:07}.png` plus `manifest.json`.
pub fn mixup_expand(cfg: &MixupConfig, out_dir: &Path) -> Result<MixupManifest, DatasetError> {
    cfg.check()?;
    let files: Vec<Vec<PathBuf>> = cfg.sources.iter().map(|s| list_images(&s.dir)).collect::<Result<_, _>>()?;
    for (s, f) in cfg.sources.iter().zip(&files) {
        if f.is_empty() && s.probability > 0.0 {
            return Err(DatasetError::EmptySource(s.dir.clone()));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| DatasetError::WriteFailure(e.to_string()))?;
    let counts: Vec<usize> = files.iter().map(Vec::len).collect();
    let draws = plan_mixup(cfg, &counts);
    let records = draws
        .par_iter()
        .enumerate()
        .map(|(index, d)| {
            let (pa, pb) = (&files[d.first.0][d.first.1], &files[d.second.0][d.second.1]);
            let mixed = blend(&load_resized(pa, cfg.resolution)?, &load_resized(pb, cfg.resolution)?, d.w1, d.w2);
            let file = format!("mix_{index:07}.png");
            mixed
                .save_with_format(out_dir.join(&file), image::ImageFormat::Png)
                .map_err(|e| DatasetError::WriteFailure(format!("{file}: {e}")))?;
            Ok(MixupRecord {
                index,
                file,
                first: pa.to_string_lossy().into_owned(),
                second: pb.to_string_lossy().into_owned(),
                w1: d.w1,
                w2: d.w2,
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    let manifest = MixupManifest { config: cfg.clone(), records };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| DatasetError::WriteFailure(e.to_string()))?;
    std::fs::write(out_dir.join("manifest.json"), text + "\n").map_err(|e| DatasetError::WriteFailure(e.to_string()))?;
    Ok(manifest)
}
