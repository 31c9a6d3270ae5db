use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kabsch, EvalError, KdTree, SimilarityTransform};
use crate::math::Vec3;
use crate::render::PointCloud;

pub const DEFAULT_ICP_ITERS: usize = 50;
pub const DEFAULT_ICP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    /// Rigid transform (scale 1) taking `src` onto `dst`.
    pub transform: SimilarityTransform,
    /// Nearest-neighbour RMS after the last accepted step.
    pub rms: f64,
    pub iterations: usize,
    /// RMS before the first step, then after every accepted step.
    pub rms_history: Vec<f64>,
}

/// Nearest target point for every transformed source point, plus the RMS.
fn correspond(tree: &KdTree, dst: &[Vec3], src: &[Vec3], t: &SimilarityTransform) -> (Vec<Vec3>, f64) {
    let hits: Vec<(usize, f64)> =
        src.par_iter().map(|p| tree.nearest(&t.apply(p)).expect("non-empty target")).collect();
    let sum: f64 = hits.iter().map(|h| h.1).sum();
    (hits.iter().map(|h| dst[h.0]).collect(), (sum / src.len() as f64).sqrt())
}

/// Point-to-point rigid ICP. A step that would raise the RMS is discarded and
/// ends the loop, so `rms_history` never increases.
pub fn icp(src: &PointCloud, dst: &PointCloud, max_iters: usize, tol: f64) -> Result<IcpResult, EvalError> {
    if src.is_empty() || dst.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    if max_iters == 0 {
        return Err(EvalError::InvalidArgument("max_iters must be at least 1".into()));
    }
    let tree = KdTree::new(&dst.points);
    let mut transform = SimilarityTransform::identity();
    let (mut matched, mut rms) = correspond(&tree, &dst.points, &src.points, &transform);
    let mut history = vec![rms];
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let candidate = kabsch(&src.points, &matched)?.transform;
        let (next_matched, next_rms) = correspond(&tree, &dst.points, &src.points, &candidate);
        if next_rms > rms {
            break;
        }
        let improvement = rms - next_rms;
        transform = candidate;
        matched = next_matched;
        rms = next_rms;
        history.push(rms);
        if improvement < tol {
            break;
        }
    }
    Ok(IcpResult { transform, rms, iterations, rms_history: history })
}

#[cfg(test)]
mod tests {
    use nalgebra::Rotation3;
    use rand::Rng;

    use super::*;
    use crate::math::rng_for;

    fn cloud(n: usize) -> PointCloud {
        let mut rng = rng_for(11, 0);
        PointCloud::new(
            (0..n)
                .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5), rng.random_range(0.0..2.0)))
                .collect(),
        )
    }

    #[test]
    fn converges_on_small_perturbation() {
        let src = cloud(1000);
        let r = *Rotation3::from_axis_angle(&Vec3::z_axis(), 5f64.to_radians()).matrix();
        let t = Vec3::new(0.05, 0.0, 0.0);
        let dst = PointCloud::new(src.points.iter().map(|p| r * p + t).collect());
        let res = icp(&src, &dst, DEFAULT_ICP_ITERS, DEFAULT_ICP_TOL).unwrap();
        assert!(res.rms < 1e-6, "rms {}", res.rms);
        assert!((res.transform.rotation - r).abs().max() < 1e-6);
        assert!(res.rms_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn identity_and_iteration_cap() {
        let src = cloud(200);
        let res = icp(&src, &src, 10, DEFAULT_ICP_TOL).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.rms < 1e-12);

        let r = *Rotation3::from_axis_angle(&Vec3::x_axis(), 0.3).matrix();
        let dst = PointCloud::new(src.points.iter().map(|p| r * p + Vec3::new(0.3, 0.1, 0.0)).collect());
        let one = icp(&src, &dst, 1, DEFAULT_ICP_TOL).unwrap();
        assert_eq!(one.iterations, 1);
        assert!(one.rms < one.rms_history[0]);
        assert_eq!(icp(&src, &PointCloud::default(), 5, 1e-7), Err(EvalError::EmptyCloud));
    }
}
