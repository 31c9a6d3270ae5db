use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Camera, RenderError, SceneBounds, DEFAULT_RADIUS_SCALE};
use crate::math::{rng_for, unit_f64, Vec3};
use crate::scene::SceneProgram;

/// Unit-sphere vertices of an icosahedron subdivided `subdivision` times.
pub fn icosphere_vertices(subdivision: u32) -> Vec<Vec3> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivision {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    verts
}

fn sphere_rig(program: &SceneProgram, directions: &[Vec3], radius_scale: f64) -> Result<Vec<Camera>, RenderError> {
    if !(radius_scale.is_finite() && radius_scale > 0.0) {
        return Err(RenderError::InvalidRig(format!("radius scale must be positive, got {radius_scale}")));
    }
    let bounds = SceneBounds::of(program)?;
    let r = bounds.radius * radius_scale;
    Ok(directions.iter().map(|d| Camera::look_at(bounds.center + d * r, bounds.center)).collect())
}

/// One camera per icosphere vertex (12, 42, 162 or 642 for subdivision 0..=3),
/// all looking at the scene center from `radius_scale` times the bounding radius.
pub fn icosphere_cameras(
    program: &SceneProgram,
    subdivision: u32,
    radius_scale: f64,
) -> Result<Vec<Camera>, RenderError> {
    if subdivision > 3 {
        return Err(RenderError::InvalidRig(format!("subdivision must be in 0..=3, got {subdivision}")));
    }
    sphere_rig(program, &icosphere_vertices(subdivision), radius_scale)
}

/// `count` cameras uniformly distributed over the upper hemisphere (z at or
/// above the scene center) of the default camera sphere.
pub fn upper_hemisphere_cameras(program: &SceneProgram, count: usize, seed: u64) -> Result<Vec<Camera>, RenderError> {
    if count == 0 {
        return Err(RenderError::InvalidRig("camera count must be at least 1".into()));
    }
    let mut rng = rng_for(seed, 0xCA3E_2A5);
    let dirs: Vec<Vec3> = (0..count)
        .map(|_| {
            // z uniform in [0, 1] gives area-uniform points on the hemisphere
            let z = unit_f64(&mut rng);
            let phi = TAU * unit_f64(&mut rng);
            let s = (1.0 - z * z).max(0.0).sqrt();
            Vec3::new(s * phi.cos(), s * phi.sin(), z)
        })
        .collect();
    sphere_rig(program, &dirs, DEFAULT_RADIUS_SCALE)
}

/// Near-uniform placement of an arbitrary number of cameras on a Fibonacci spiral.
pub fn fibonacci_cameras(program: &SceneProgram, count: usize, radius_scale: f64) -> Result<Vec<Camera>, RenderError> {
    if count == 0 {
        return Err(RenderError::InvalidRig("camera count must be at least 1".into()));
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    let dirs: Vec<Vec3> = (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(s * phi.cos(), s * phi.sin(), z)
        })
        .collect();
    sphere_rig(program, &dirs, radius_scale)
}

/// Camera rig selection, written `icosphere:<subdivision>[:<radius_scale>]`,
/// `hemisphere:<count>` or `fibonacci:<count>[:<radius_scale>]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RigSpec {
    Icosphere { subdivision: u32, radius_scale: f64 },
    Hemisphere { count: usize },
    Fibonacci { count: usize, radius_scale: f64 },
}

impl RigSpec {
    pub fn cameras(&self, program: &SceneProgram, seed: u64) -> Result<Vec<Camera>, RenderError> {
        match *self {
            RigSpec::Icosphere { subdivision, radius_scale } => icosphere_cameras(program, subdivision, radius_scale),
            RigSpec::Hemisphere { count } => upper_hemisphere_cameras(program, count, seed),
            RigSpec::Fibonacci { count, radius_scale } => fibonacci_cameras(program, count, radius_scale),
        }
    }
}

impl FromStr for RigSpec {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RenderError::InvalidRig(format!("cannot parse rig {s:?}"));
        let mut it = s.trim().split(':');
        let kind = it.next().ok_or_else(bad)?;
        let first = it.next();
        let scale = match it.next() {
            Some(v) => v.parse::<f64>().map_err(|_| bad())?,
            None => DEFAULT_RADIUS_SCALE,
        };
        if it.next().is_some() {
            return Err(bad());
        }
        match kind {
            "icosphere" => Ok(RigSpec::Icosphere {
                subdivision: first.unwrap_or("0").parse().map_err(|_| bad())?,
                radius_scale: scale,
            }),
            "hemisphere" => Ok(RigSpec::Hemisphere { count: first.unwrap_or("3").parse().map_err(|_| bad())? }),
            "fibonacci" => Ok(RigSpec::Fibonacci {
                count: first.ok_or_else(bad)?.parse().map_err(|_| bad())?,
                radius_scale: scale,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for RigSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RigSpec::Icosphere { subdivision, radius_scale } => write!(f, "icosphere:{subdivision}:{radius_scale}"),
            RigSpec::Hemisphere { count } => write!(f, "hemisphere:{count}"),
            RigSpec::Fibonacci { count, radius_scale } => write!(f, "fibonacci:{count}:{radius_scale}"),
        }
    }
}
