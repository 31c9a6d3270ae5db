use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{EvalError, SimilarityTransform};
use crate::math::Vec3;

/// A fitted transform and the RMS of the remaining point distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub transform: SimilarityTransform,
    pub rms: f64,
}

fn mean(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64
}

/// Closed-form least-squares fit. Returns the transform and the covariance's
/// singular values, largest first.
fn fit(src: &[Vec3], dst: &[Vec3], with_scale: bool) -> (SimilarityTransform, [f64; 3]) {
    let n = src.len() as f64;
    let (ms, md) = (mean(src), mean(dst));
    let mut cov = Matrix3::zeros();
    let mut var_src = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let (cs, cd) = (s - ms, d - md);
        cov += cd * cs.transpose();
        var_src += cs.norm_squared();
    }
    cov /= n;
    var_src /= n;

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap_or_else(Matrix3::identity), svd.v_t.unwrap_or_else(Matrix3::identity));
    // nalgebra does not order singular values; the sign flip belongs on the smallest
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smallest = order[2];
    let mut d = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        d[(smallest, smallest)] = -1.0;
    }
    let rotation = u * d * v_t;
    let trace: f64 = (0..3).map(|i| svd.singular_values[i] * d[(i, i)]).sum();
    let scale = if with_scale && var_src > 0.0 { trace / var_src } else { 1.0 };
    let translation = md - scale * (rotation * ms);
    let sv = [svd.singular_values[order[0]], svd.singular_values[order[1]], svd.singular_values[order[2]]];
    (SimilarityTransform { scale, rotation, translation }, sv)
}

fn rms(t: &SimilarityTransform, src: &[Vec3], dst: &[Vec3]) -> f64 {
    (src.iter().zip(dst).map(|(s, d)| (t.apply(s) - d).norm_squared()).sum::<f64>() / src.len() as f64).sqrt()
}

fn check(src: &[Vec3], dst: &[Vec3]) -> Result<(), EvalError> {
    if src.len() != dst.len() {
        return Err(EvalError::SizeMismatch(src.len(), dst.len()));
    }
    if src.len() < 3 {
        return Err(EvalError::DegenerateConfiguration(format!("{} correspondences, need at least 3", src.len())));
    }
    Ok(())
}

/// Similarity `(s, R, t)` minimizing `Σ‖dst_i − (s·R·src_i + t)‖²`, with the
/// determinant correction keeping `R` a proper rotation.
pub fn kabsch_umeyama(src: &[Vec3], dst: &[Vec3]) -> Result<Alignment, EvalError> {
    check(src, dst)?;
    let (transform, sv) = fit(src, dst, true);
    if !(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0] {
        return Err(EvalError::DegenerateConfiguration(format!(
            "centered covariance has rank < 2 (singular values {sv:?})"
        )));
    }
    Ok(Alignment { rms: rms(&transform, src, dst), transform })
}

/// Rigid variant with the scale fixed to 1. Never fails on degenerate input;
/// the rotation is then one of the equally good solutions.
pub fn kabsch(src: &[Vec3], dst: &[Vec3]) -> Result<Alignment, EvalError> {
    if src.len() != dst.len() {
        return Err(EvalError::SizeMismatch(src.len(), dst.len()));
    }
    if src.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    let (transform, _) = fit(src, dst, false);
    Ok(Alignment { rms: rms(&transform, src, dst), transform })
}
