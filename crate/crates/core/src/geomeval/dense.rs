use serde::{Deserialize, Serialize};

use super::{chamfer, chamfer_squared, hausdorff, icp, EvalError, DEFAULT_ICP_ITERS, DEFAULT_ICP_TOL};
use crate::render::{sample_surface_points, PointCloud};
use crate::scene::SceneProgram;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseOptions {
    pub n_samples: usize,
    pub seed: u64,
    pub icp_iters: usize,
    pub icp_tol: f64,
    /// Report the squared-distance Chamfer variant instead.
    pub squared_chamfer: bool,
}

impl Default for DenseOptions {
    fn default() -> Self {
        DenseOptions {
            n_samples: 10_000,
            seed: 0,
            icp_iters: DEFAULT_ICP_ITERS,
            icp_tol: DEFAULT_ICP_TOL,
            squared_chamfer: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseReport {
    pub chamfer: f64,
    pub hausdorff: f64,
    pub squared_chamfer: bool,
    pub icp_iterations: usize,
    pub final_rms: f64,
    pub n_samples: usize,
}

/// Samples the program's surface, registers the samples to `target` with ICP
/// and measures Chamfer and Hausdorff distances in the target's frame.
pub fn dense_eval(program: &SceneProgram, target: &PointCloud, opts: &DenseOptions) -> Result<DenseReport, EvalError> {
    if target.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    if opts.n_samples < 100 {
        return Err(EvalError::InvalidArgument(format!("n_samples must be at least 100, got {}", opts.n_samples)));
    }
    let samples = sample_surface_points(program, opts.n_samples, opts.seed)?;
    let reg = icp(&samples, target, opts.icp_iters, opts.icp_tol)?;
    let aligned = PointCloud::new(samples.points.iter().map(|p| reg.transform.apply(p)).collect());
    let chamfer = if opts.squared_chamfer { chamfer_squared(&aligned, target)? } else { chamfer(&aligned, target)? };
    Ok(DenseReport {
        chamfer,
        hausdorff: hausdorff(&aligned, target)?,
        squared_chamfer: opts.squared_chamfer,
        icp_iterations: reg.iterations,
        final_rms: reg.rms,
        n_samples: opts.n_samples,
    })
}
