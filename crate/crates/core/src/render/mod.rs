//! Deterministic software renderer and geometric sampler for scene programs.
//!
//! Images come from per-pixel sphere tracing against the union SDF of all
//! parts. Four modes are supported: Lambertian `shaded`, flat `albedo`,
//! ray-hit `depth` and 1-based part-index `mask`.

mod io;
mod rig;
mod sample;
pub mod sdf;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;
use crate::scene::SceneProgram;

pub use io::{
    decode_png_rgb, encode_png, mask_labels_json, write_camera_metadata, write_image, write_mask_labels,
    CameraRecord,
};
pub use rig::{fibonacci_cameras, icosphere_cameras, icosphere_vertices, upper_hemisphere_cameras, RigSpec};
pub use sample::{part_centroids, sample_surface_points, surface_area, LabeledCentroid, LabeledCentroids, PointCloud};
pub use trace::{render, render_views, TraceSettings};

pub const DEFAULT_RESOLUTION: (u32, u32) = (384, 384);
pub const DEFAULT_FOV: f64 = 50.0 * std::f64::consts::PI / 180.0;
pub const DEFAULT_RADIUS_SCALE: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("scene has no parts")]
    EmptyScene,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("mask mode supports at most 255 parts, scene has {0}")]
    TooManyParts(usize),
    #[error("invalid rig: {0}")]
    InvalidRig(String),
    #[error("image i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    /// Vertical field of view, radians.
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    /// Camera looking at `target` with world +Z as the preferred up direction.
    pub fn look_at(position: Vec3, target: Vec3) -> Camera {
        let forward = (target - position).normalize();
        let up = if forward.cross(&Vec3::z()).norm() < 1e-6 { Vec3::y() } else { Vec3::z() };
        Camera {
            position,
            target,
            up,
            vertical_fov: DEFAULT_FOV,
            width: DEFAULT_RESOLUTION.0,
            height: DEFAULT_RESOLUTION.1,
        }
    }

    pub fn with_resolution(mut self, width: u32, height: u32) -> Camera {
        self.width = width;
        self.height = height;
        self
    }

    pub fn with_fov(mut self, vertical_fov: f64) -> Camera {
        self.vertical_fov = vertical_fov;
        self
    }

    pub fn check(&self) -> Result<(), RenderError> {
        let bad = |m: &str| Err(RenderError::InvalidCamera(m.to_string()));
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if !finite(&self.position) || !finite(&self.target) || !finite(&self.up) {
            return bad("non-finite vector");
        }
        if (self.target - self.position).norm() <= 0.0 {
            return bad("position equals target");
        }
        if (self.up.norm() - 1.0).abs() > 1e-6 {
            return bad("up must be unit length");
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < std::f64::consts::PI) {
            return bad("fov must lie in (0, pi)");
        }
        if self.width < 16 || self.height < 16 {
            return bad("resolution must be at least 16x16");
        }
        if (self.target - self.position).normalize().cross(&self.up).norm() < 1e-9 {
            return bad("up is parallel to the view direction");
        }
        Ok(())
    }

    /// Orthonormal `(right, up, forward)` basis.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let forward = (self.target - self.position).normalize();
        let right = forward.cross(&self.up).normalize();
        let up = right.cross(&forward);
        (right, up, forward)
    }

    /// Unit direction of the primary ray through the center of pixel `(x, y)`;
    /// `y = 0` is the top row.
    pub fn ray_direction(&self, x: u32, y: u32) -> Vec3 {
        let (right, up, forward) = self.basis();
        let tan = (0.5 * self.vertical_fov).tan();
        let aspect = self.width as f64 / self.height as f64;
        let u = (2.0 * (x as f64 + 0.5) / self.width as f64 - 1.0) * aspect * tan;
        let v = (1.0 - 2.0 * (y as f64 + 0.5) / self.height as f64) * tan;
        (forward + right * u + up * v).normalize()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalLight {
    /// Unit vector pointing from the surface toward the light.
    pub direction: Vec3,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightRig {
    pub lights: Vec<DirectionalLight>,
    pub ambient: f64,
}

impl LightRig {
    /// Only ambient light at full strength: shaded output equals albedo.
    pub fn flat() -> LightRig {
        LightRig { lights: Vec::new(), ambient: 1.0 }
    }

    /// Two directional lights from random upper-hemisphere directions,
    /// intensities uniform in `[0.6, 1.0]`, ambient 0.15.
    pub fn random(seed: u64) -> LightRig {
        use crate::math::{rng_for, unit_f64};
        let mut rng = rng_for(seed, 0x11_6874);
        let lights = (0..2)
            .map(|_| {
                let z = unit_f64(&mut rng);
                let phi = std::f64::consts::TAU * unit_f64(&mut rng);
                let s = (1.0 - z * z).max(0.0).sqrt();
                DirectionalLight {
                    direction: Vec3::new(s * phi.cos(), s * phi.sin(), z).normalize(),
                    intensity: 0.6 + 0.4 * unit_f64(&mut rng),
                }
            })
            .collect();
        LightRig { lights, ambient: 0.15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    Shaded,
    Albedo,
    Depth,
    Mask,
}

impl RenderMode {
    pub const ALL: [RenderMode; 4] = [RenderMode::Shaded, RenderMode::Albedo, RenderMode::Depth, RenderMode::Mask];

    pub fn name(self) -> &'static str {
        match self {
            RenderMode::Shaded => "shaded",
            RenderMode::Albedo => "albedo",
            RenderMode::Depth => "depth",
            RenderMode::Mask => "mask",
        }
    }

    pub fn parse(s: &str) -> Option<RenderMode> {
        RenderMode::ALL.into_iter().find(|m| m.name() == s.trim())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pixels {
    /// Linear RGB in `[0, 1]`.
    Rgb(Vec<[f64; 3]>),
    /// Ray-hit distance in meters; `f64::INFINITY` for background.
    Depth(Vec<f64>),
    /// 1-based part index, 0 for background.
    Mask(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Pixels,
}

impl Image {
    fn index(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    pub fn rgb(&self, x: u32, y: u32) -> Option<[f64; 3]> {
        match &self.pixels {
            Pixels::Rgb(v) => Some(v[self.index(x, y)]),
            _ => None,
        }
    }

    pub fn depth(&self, x: u32, y: u32) -> Option<f64> {
        match &self.pixels {
            Pixels::Depth(v) => Some(v[self.index(x, y)]),
            _ => None,
        }
    }

    pub fn mask(&self, x: u32, y: u32) -> Option<u8> {
        match &self.pixels {
            Pixels::Mask(v) => Some(v[self.index(x, y)]),
            _ => None,
        }
    }

    /// SHA-256 over the raw buffer bytes, for bit-identity checks.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        match &self.pixels {
            Pixels::Rgb(v) => v.iter().flatten().for_each(|c| h.update(c.to_bits().to_le_bytes())),
            Pixels::Depth(v) => v.iter().for_each(|c| h.update(c.to_bits().to_le_bytes())),
            Pixels::Mask(v) => h.update(v),
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub camera: Camera,
    pub mode: RenderMode,
    pub image: Image,
}

/// All images rendered for one refinement iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RenderSet {
    pub iteration: usize,
    pub views: Vec<RenderedView>,
}

impl RenderSet {
    pub fn shaded(&self) -> impl Iterator<Item = &RenderedView> {
        self.views.iter().filter(|v| v.mode == RenderMode::Shaded)
    }
}

/// Bounding sphere of a program: centered on the world AABB center, radius
/// large enough to contain every part's own bounding sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBounds {
    pub center: Vec3,
    pub radius: f64,
}

impl SceneBounds {
    pub fn of(program: &SceneProgram) -> Result<SceneBounds, RenderError> {
        if program.parts.is_empty() {
            return Err(RenderError::EmptyScene);
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for part in &program.parts {
            let half = local_half_extents(&part.primitive);
            let rot = part.pose.rotation_matrix();
            // world AABB half extents of a rotated box: |R| * h
            let world_half = rot.abs() * half;
            lo = lo.inf(&(part.pose.position - world_half));
            hi = hi.sup(&(part.pose.position + world_half));
        }
        let center = 0.5 * (lo + hi);
        let radius = program
            .parts
            .iter()
            .map(|p| (p.pose.position - center).norm() + p.primitive.bounding_radius())
            .fold(0.0, f64::max);
        if !(radius.is_finite() && center.iter().all(|c| c.is_finite())) {
            return Err(RenderError::InvalidScene("non-finite bounds".into()));
        }
        Ok(SceneBounds { center, radius })
    }
}

fn local_half_extents(prim: &crate::scene::Primitive) -> Vec3 {
    use crate::scene::Primitive::*;
    match *prim {
        Cuboid { dims } => dims * 0.5,
        Sphere { radius } => Vec3::repeat(radius),
        Cylinder { radius, height } | Cone { radius, height } => Vec3::new(radius, radius, 0.5 * height),
        Torus { major_radius, minor_radius } => {
            Vec3::new(major_radius + minor_radius, major_radius + minor_radius, minor_radius)
        }
    }
}
