//! Geometric evaluation: similarity registration, ICP, dense point-cloud
//! distances and the sparse part-arrangement metric.

mod cloud;
mod dense;
mod distance;
mod icp;
mod kdtree;
mod sparse;
mod umeyama;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;

pub use cloud::{centroids_from_cloud, load_centroids, load_cloud, load_targets, LoadedCloud};
pub use dense::{dense_eval, DenseOptions, DenseReport};
pub use distance::{chamfer, chamfer_squared, hausdorff, nn_distances};
pub use icp::{icp, IcpResult, DEFAULT_ICP_ITERS, DEFAULT_ICP_TOL};
pub use kdtree::KdTree;
pub use sparse::{
    compute_nn_metric, map_parts, map_parts_fallback, sparse_eval, PartMapping, SkippedTarget, SparseReport,
    TargetResidual, NN_K,
};
pub use umeyama::{kabsch, kabsch_umeyama, Alignment};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point sets differ in size ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("target {target}: only {pairs} usable correspondences")]
    InsufficientCorrespondences { target: String, pairs: usize },
    #[error("every target was skipped")]
    AllTargetsSkipped,
    #[error("mapper: malformed response: {0}")]
    MalformedResponse(String),
    #[error("data format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Render(#[from] crate::render::RenderError),
}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        EvalError::Io(e.to_string())
    }
}

/// `x ↦ s·R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform { scale: 1.0, rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * (self.rotation * p) + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let rt = self.rotation.transpose();
        SimilarityTransform { scale: 1.0 / self.scale, rotation: rt, translation: -(rt * self.translation) / self.scale }
    }
}
