use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{kabsch_umeyama, EvalError, SimilarityTransform};
use crate::agents::{normalize_label, Template};
use crate::math::Vec3;
use crate::mllm::{extract_json, Client, RequestTag};
use crate::render::LabeledCentroids;

/// Number of nearest targets averaged into the sparse metric.
pub const NN_K: usize = 5;

/// Prototype label to target label assignment.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartMapping {
    pub pairs: Vec<(String, String)>,
    pub unmapped: Vec<String>,
}

impl PartMapping {
    pub fn get(&self, proto: &str) -> Option<&str> {
        self.pairs.iter().find(|(p, _)| p == proto).map(|(_, t)| t.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResidual {
    pub target: String,
    pub residual: f64,
    pub pairs: usize,
    pub mapping: PartMapping,
    pub transform: SimilarityTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTarget {
    pub target: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseReport {
    /// Sorted by target id.
    pub residuals: Vec<TargetResidual>,
    pub metric5nn: f64,
    pub skipped: Vec<SkippedTarget>,
    pub mapped_labels: usize,
    pub unmapped_labels: usize,
}

fn unique(labels: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for l in labels {
        if !out.contains(l) {
            out.push(l.clone());
        }
    }
    out
}

/// Name-based mapping. A target label equal to the prototype label up to
/// case wins; otherwise labels are compared after lowercasing and dropping
/// digits, punctuation and a plural `s`. A key shared by several target
/// labels is ambiguous and left unmapped.
pub fn map_parts_fallback(proto: &[String], target: &[String]) -> PartMapping {
    let targets = unique(target);
    let mut by_key: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for t in &targets {
        by_key.entry(normalize_label(t)).or_default().push(t.clone());
    }
    let mut mapping = PartMapping::default();
    for p in unique(proto) {
        let exact: Vec<&String> = targets.iter().filter(|t| t.trim().eq_ignore_ascii_case(p.trim())).collect();
        if let [t] = exact.as_slice() {
            mapping.pairs.push((p, (*t).clone()));
            continue;
        }
        match by_key.get(&normalize_label(&p)).map(Vec::as_slice) {
            Some([t]) => mapping.pairs.push((p, t.clone())),
            _ => mapping.unmapped.push(p),
        }
    }
    mapping
}

fn parse_mapping(text: &str, proto: &[String], target: &[String]) -> Result<PartMapping, EvalError> {
    let json = extract_json(text).map_err(|e| EvalError::MalformedResponse(e.to_string()))?;
    let Value::Object(map) = json else {
        return Err(EvalError::MalformedResponse("expected a JSON object".into()));
    };
    for key in map.keys() {
        if !proto.contains(key) {
            return Err(EvalError::MalformedResponse(format!("unknown prototype label {key:?}")));
        }
    }
    let mut mapping = PartMapping::default();
    for p in proto {
        match map.get(p) {
            None | Some(Value::Null) => mapping.unmapped.push(p.clone()),
            Some(Value::String(t)) if target.contains(t) => mapping.pairs.push((p.clone(), t.clone())),
            Some(other) => {
                return Err(EvalError::MalformedResponse(format!("{p:?} maps to {other}, not a target label")))
            }
        }
    }
    Ok(mapping)
}

/// Maps prototype labels onto target labels, through the backend when one is
/// given and by name otherwise.
pub fn map_parts(
    proto: &[String],
    target: &[String],
    client: Option<&Client>,
    target_id: &str,
) -> Result<PartMapping, EvalError> {
    if proto.is_empty() || target.is_empty() {
        return Err(EvalError::InvalidArgument("label lists must be non-empty".into()));
    }
    let Some(client) = client else {
        return Ok(map_parts_fallback(proto, target));
    };
    let (proto, target) = (unique(proto), unique(target));
    let list = |v: &[String]| serde_json::to_string(v).unwrap_or_default();
    let prompt = Template::Mapper
        .fill(&[("P", &list(&proto)), ("T", &list(&target))])
        .map_err(|e| EvalError::InvalidArgument(e.to_string()))?;
    let request = client.request(prompt, RequestTag::new("mapper", target_id, 0));
    let mut attempt = 0;
    loop {
        let reply = client.complete(&request).map_err(|e| EvalError::MalformedResponse(e.to_string()))?;
        match parse_mapping(&reply.text, &proto, &target) {
            Ok(m) => return Ok(m),
            Err(e) if attempt < client.max_retries => {
                log::warn!("mapper reply for {target_id} unusable ({e}); resubmitting");
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Mean of the `k` smallest residuals, or of all when fewer are given.
pub fn compute_nn_metric(residuals: &[f64], k: usize) -> Option<f64> {
    if residuals.is_empty() || k == 0 {
        return None;
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let take = &sorted[..k.min(sorted.len())];
    Some(take.iter().sum::<f64>() / take.len() as f64)
}

fn mean(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64
}

/// Rough frame used only to decide which same-label instances pair up.
fn provisional(classes: &[(Vec<Vec3>, Vec<Vec3>)]) -> SimilarityTransform {
    if classes.len() >= 3 {
        let src: Vec<Vec3> = classes.iter().map(|(p, _)| mean(p)).collect();
        let dst: Vec<Vec3> = classes.iter().map(|(_, t)| mean(t)).collect();
        if let Ok(a) = kabsch_umeyama(&src, &dst) {
            return a.transform;
        }
    }
    let all_p: Vec<Vec3> = classes.iter().flat_map(|(p, _)| p.iter().copied()).collect();
    let all_t: Vec<Vec3> = classes.iter().flat_map(|(_, t)| t.iter().copied()).collect();
    let (mp, mt) = (mean(&all_p), mean(&all_t));
    let radius = |pts: &[Vec3], m: Vec3| (pts.iter().map(|p| (p - m).norm_squared()).sum::<f64>() / pts.len() as f64).sqrt();
    let (rp, rt) = (radius(&all_p, mp), radius(&all_t, mt));
    let scale = if rp > 0.0 && rt > 0.0 { rt / rp } else { 1.0 };
    SimilarityTransform { scale, rotation: nalgebra::Matrix3::identity(), translation: mt - scale * mp }
}

/// Pairs instances of one class greedily by distance under `t`.
fn greedy_pairs(protos: &[Vec3], targets: &[Vec3], t: &SimilarityTransform) -> Vec<(usize, usize)> {
    let mut cand: Vec<(f64, usize, usize)> = protos
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            let q = t.apply(p);
            targets.iter().enumerate().map(move |(j, x)| ((q - x).norm(), i, j))
        })
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_p, mut used_t) = (vec![false; protos.len()], vec![false; targets.len()]);
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !used_p[i] && !used_t[j] {
            used_p[i] = true;
            used_t[j] = true;
            out.push((i, j));
        }
    }
    out.sort();
    out
}

fn eval_target(
    proto: &LabeledCentroids,
    id: &str,
    target: &LabeledCentroids,
    client: Option<&Client>,
) -> Result<TargetResidual, EvalError> {
    let proto_labels: Vec<String> = proto.entries.iter().map(|e| e.label.clone()).collect();
    let target_labels: Vec<String> = target.entries.iter().map(|e| e.label.clone()).collect();
    let mapping = map_parts(&proto_labels, &target_labels, client, id)?;

    let mut classes: Vec<(Vec<Vec3>, Vec<Vec3>)> = Vec::new();
    for t_label in unique(&target_labels) {
        let protos: Vec<Vec3> = proto
            .entries
            .iter()
            .filter(|e| mapping.get(&e.label) == Some(t_label.as_str()))
            .map(|e| e.centroid)
            .collect();
        let targets: Vec<Vec3> = target.entries.iter().filter(|e| e.label == t_label).map(|e| e.centroid).collect();
        if !protos.is_empty() && !targets.is_empty() {
            classes.push((protos, targets));
        }
    }
    if classes.is_empty() {
        return Err(EvalError::InsufficientCorrespondences { target: id.into(), pairs: 0 });
    }
    let rough = provisional(&classes);
    let (mut src, mut dst) = (Vec::new(), Vec::new());
    for (protos, targets) in &classes {
        for (i, j) in greedy_pairs(protos, targets, &rough) {
            src.push(protos[i]);
            dst.push(targets[j]);
        }
    }
    if src.len() < 3 {
        return Err(EvalError::InsufficientCorrespondences { target: id.into(), pairs: src.len() });
    }
    let transform = kabsch_umeyama(&src, &dst)?.transform;
    let residual = src.iter().zip(&dst).map(|(s, d)| (transform.apply(s) - d).norm()).sum::<f64>() / src.len() as f64;
    Ok(TargetResidual { target: id.into(), residual, pairs: src.len(), mapping, transform })
}

/// Per-target aligned-centroid residuals and their 5-NN mean. Targets that
/// cannot be aligned are skipped and listed in the report.
pub fn sparse_eval(
    proto: &LabeledCentroids,
    targets: &[(String, LabeledCentroids)],
    client: Option<&Client>,
) -> Result<SparseReport, EvalError> {
    if targets.is_empty() {
        return Err(EvalError::InvalidArgument("no targets".into()));
    }
    if proto.entries.is_empty() {
        return Err(EvalError::InvalidArgument("prototype has no parts".into()));
    }
    let mut outcomes: Vec<(String, Result<TargetResidual, EvalError>)> =
        targets.par_iter().map(|(id, t)| (id.clone(), eval_target(proto, id, t, client))).collect();
    outcomes.sort_by(|a, b| a.0.cmp(&b.0));

    let (mut residuals, mut skipped) = (Vec::new(), Vec::new());
    for (id, outcome) in outcomes {
        match outcome {
            Ok(r) => residuals.push(r),
            Err(e @ (EvalError::MalformedResponse(_) | EvalError::InvalidArgument(_))) => return Err(e),
            Err(e) => {
                log::warn!("target {id} skipped: {e}");
                skipped.push(SkippedTarget { target: id, reason: e.to_string() });
            }
        }
    }
    let values: Vec<f64> = residuals.iter().map(|r| r.residual).collect();
    let metric5nn = compute_nn_metric(&values, NN_K).ok_or(EvalError::AllTargetsSkipped)?;
    Ok(SparseReport {
        mapped_labels: residuals.iter().map(|r| r.mapping.pairs.len()).sum(),
        unmapped_labels: residuals.iter().map(|r| r.mapping.unmapped.len()).sum(),
        residuals,
        metric5nn,
        skipped,
    })
}
