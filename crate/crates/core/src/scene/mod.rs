//! ProtoScene: the flat, part-labeled primitive language prototypes are written in.
//!
//! ```text
//! # a one-part program
//! canvas [0.6, 0.6, 1.0]
//! part "Seat" { cuboid dims [0.6, 0.6, 0.1] pos [0.3, 0.3, 0.5] rot [0, 0, 0] rgb [0.7, 0.7, 0.7] }
//! ```
//!
//! Axes follow the layout convention used by the designer prompts: X points
//! outward (back to front), Y to the right and Z up. Rotations are Euler
//! angles in radians applied intrinsically in X, then Y, then Z order.

mod lexer;
mod parser;
mod validate;
mod write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{euler_xyz, normalize_angle, Vec3};

pub use parser::parse_program;
pub use validate::{validate, Diagnostic, DiagnosticKind};
pub use write::serialize_program;

pub const DEFAULT_ALBEDO: [f64; 3] = [0.7, 0.7, 0.7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Full extents `[length (x), width (y), height (z)]`.
    Cuboid { dims: Vec3 },
    /// Axis along local z, centered on the pose origin.
    Cylinder { radius: f64, height: f64 },
    Sphere { radius: f64 },
    /// Base disk at local `z = -height/2`, apex at `z = +height/2`.
    Cone { radius: f64, height: f64 },
    /// Ring lies in the local xy-plane.
    Torus { major_radius: f64, minor_radius: f64 },
}

impl Primitive {
    pub fn keyword(&self) -> &'static str {
        match self {
            Primitive::Cuboid { .. } => "cuboid",
            Primitive::Cylinder { .. } => "cylinder",
            Primitive::Sphere { .. } => "sphere",
            Primitive::Cone { .. } => "cone",
            Primitive::Torus { .. } => "torus",
        }
    }

    /// Named scalar parameters, in grammar order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Primitive::Cuboid { dims } => vec![("dims.x", dims.x), ("dims.y", dims.y), ("dims.z", dims.z)],
            Primitive::Cylinder { radius, height } | Primitive::Cone { radius, height } => {
                vec![("radius", radius), ("height", height)]
            }
            Primitive::Sphere { radius } => vec![("radius", radius)],
            Primitive::Torus { major_radius, minor_radius } => {
                vec![("major_radius", major_radius), ("minor_radius", minor_radius)]
            }
        }
    }

    /// Radius of a sphere about the pose origin enclosing the primitive.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Primitive::Cuboid { dims } => 0.5 * dims.norm(),
            Primitive::Cylinder { radius, height } | Primitive::Cone { radius, height } => {
                radius.hypot(0.5 * height)
            }
            Primitive::Sphere { radius } => radius,
            Primitive::Torus { major_radius, minor_radius } => major_radius + minor_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Center of the primitive, meters.
    pub position: Vec3,
    /// Intrinsic XYZ Euler angles, radians, each in `(-pi, pi]`.
    pub rotation: Vec3,
}

impl Pose {
    pub fn new(position: Vec3, rotation: Vec3) -> Self {
        Pose { position, rotation: rotation.map(normalize_angle) }
    }

    pub fn at(position: Vec3) -> Self {
        Pose { position, rotation: Vec3::zeros() }
    }

    pub fn rotation_matrix(&self) -> nalgebra::Matrix3<f64> {
        euler_xyz(&self.rotation)
    }

    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.rotation_matrix() * local + self.position
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub albedo: [f64; 3],
}

impl Default for Material {
    fn default() -> Self {
        Material { albedo: DEFAULT_ALBEDO }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartNode {
    pub label: String,
    pub primitive: Primitive,
    pub pose: Pose,
    pub material: Material,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneProgram {
    pub parts: Vec<PartNode>,
    pub canvas: Option<Vec3>,
}

impl SceneProgram {
    pub fn part(&self, label: &str) -> Option<&PartNode> {
        self.parts.iter().find(|p| p.label == label)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.parts.iter().map(|p| p.label.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: expected {expected}, found {found}")]
    Syntax { line: usize, column: usize, expected: String, found: String },
    #[error("line {line}, column {column}: duplicate part label {label:?}")]
    DuplicateLabel { label: String, line: usize, column: usize },
    #[error("line {line}, column {column}: {field} of {label:?} must be positive")]
    NonPositiveDimension { label: String, field: String, line: usize, column: usize },
    #[error("line {line}, column {column}: minor_radius of torus {label:?} must be smaller than major_radius")]
    SelfIntersecting { label: String, line: usize, column: usize },
    #[error("line {line}, column {column}: {field} of {label:?} must lie in [0, 1]")]
    OutOfRange { label: String, field: String, line: usize, column: usize },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match *self {
            ParseError::Syntax { line, column, .. }
            | ParseError::DuplicateLabel { line, column, .. }
            | ParseError::NonPositiveDimension { line, column, .. }
            | ParseError::SelfIntersecting { line, column, .. }
            | ParseError::OutOfRange { line, column, .. } => (line, column),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArrangementError {
    #[error("arrangement entry {label:?} has non-positive or non-finite {field}")]
    InvalidArrangement { label: String, field: String },
}

/// Realizes each arrangement entry as one cuboid with the entry's dimensions and pose.
pub fn arrangement_to_program(
    arrangement: &crate::agents::Arrangement,
) -> Result<SceneProgram, ArrangementError> {
    let mut parts = Vec::with_capacity(arrangement.entries.len());
    for entry in &arrangement.entries {
        for (axis, v) in ["dims.x", "dims.y", "dims.z"].iter().zip(entry.dims.iter()) {
            if !(v.is_finite() && *v > 0.0) {
                return Err(ArrangementError::InvalidArrangement {
                    label: entry.label.clone(),
                    field: axis.to_string(),
                });
            }
        }
        parts.push(PartNode {
            label: entry.label.clone(),
            primitive: Primitive::Cuboid { dims: entry.dims },
            pose: Pose::new(entry.position, entry.rotation),
            material: Material::default(),
        });
    }
    Ok(SceneProgram { parts, canvas: arrangement.canvas })
}
