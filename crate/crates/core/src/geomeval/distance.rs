use rayon::prelude::*;

use super::{EvalError, KdTree};
use crate::render::PointCloud;

/// Euclidean distance from every point of `a` to its nearest point in `b`, in `a`'s order.
pub fn nn_distances(a: &PointCloud, b: &PointCloud) -> Result<Vec<f64>, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    let tree = KdTree::new(&b.points);
    Ok(a.points.par_iter().map(|p| tree.nearest(p).map(|(_, d2)| d2.sqrt()).unwrap_or(f64::INFINITY)).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `½·(mean_a d(a, B) + mean_b d(b, A))` with plain (not squared) distances.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64, EvalError> {
    Ok(0.5 * (mean(&nn_distances(a, b)?) + mean(&nn_distances(b, a)?)))
}

/// Same as [`chamfer`] but averaging squared distances.
pub fn chamfer_squared(a: &PointCloud, b: &PointCloud) -> Result<f64, EvalError> {
    let sq = |v: Vec<f64>| v.iter().map(|d| d * d).sum::<f64>() / v.len() as f64;
    Ok(0.5 * (sq(nn_distances(a, b)?) + sq(nn_distances(b, a)?)))
}

/// `max(max_a d(a, B), max_b d(b, A))`.
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64, EvalError> {
    let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    Ok(max(nn_distances(a, b)?).max(max(nn_distances(b, a)?)))
}
