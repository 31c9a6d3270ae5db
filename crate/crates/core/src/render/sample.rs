use std::f64::consts::{PI, TAU};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::RenderError;
use crate::math::{rng_for, unit_f64, Vec3};
use crate::scene::{Primitive, SceneProgram};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Per-point index into the program's parts (or the cloud's label list).
    pub labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points, labels: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Diagonal of the axis-aligned bounding box.
    pub fn diameter(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let lo = self.points.iter().fold(Vec3::repeat(f64::INFINITY), |a, p| a.inf(p));
        let hi = self.points.iter().fold(Vec3::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
        (hi - lo).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCentroid {
    pub label: String,
    pub centroid: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledCentroids {
    pub entries: Vec<LabeledCentroid>,
}

impl LabeledCentroids {
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, Vec3)>) -> Self {
        LabeledCentroids {
            entries: pairs.into_iter().map(|(l, c)| LabeledCentroid { label: l.into(), centroid: c }).collect(),
        }
    }

    pub fn get(&self, label: &str) -> Option<Vec3> {
        self.entries.iter().find(|e| e.label == label).map(|e| e.centroid)
    }
}

/// Analytic surface area of a primitive.
pub fn surface_area(prim: &Primitive) -> f64 {
    match *prim {
        Primitive::Cuboid { dims } => 2.0 * (dims.x * dims.y + dims.x * dims.z + dims.y * dims.z),
        Primitive::Sphere { radius } => 4.0 * PI * radius * radius,
        Primitive::Cylinder { radius, height } => TAU * radius * height + 2.0 * PI * radius * radius,
        Primitive::Cone { radius, height } => PI * radius * radius.hypot(height) + PI * radius * radius,
        Primitive::Torus { major_radius, minor_radius } => 4.0 * PI * PI * major_radius * minor_radius,
    }
}

fn disk(rng: &mut impl RngCore, radius: f64) -> (f64, f64) {
    let r = radius * unit_f64(rng).sqrt();
    let a = TAU * unit_f64(rng);
    (r * a.cos(), r * a.sin())
}

/// Area-uniform point on the primitive surface, local frame.
fn sample_local(prim: &Primitive, rng: &mut impl RngCore) -> Vec3 {
    match *prim {
        Primitive::Cuboid { dims } => {
            let h = dims * 0.5;
            let faces = [dims.y * dims.z, dims.x * dims.z, dims.x * dims.y];
            let total = faces.iter().sum::<f64>();
            let pick = unit_f64(rng) * total;
            let axis = if pick < faces[0] {
                0
            } else if pick < faces[0] + faces[1] {
                1
            } else {
                2
            };
            let sign = if rng.next_u32() & 1 == 0 { 1.0 } else { -1.0 };
            let mut p = Vec3::zeros();
            for k in 0..3 {
                p[k] = if k == axis { sign * h[k] } else { (2.0 * unit_f64(rng) - 1.0) * h[k] };
            }
            p
        }
        Primitive::Sphere { radius } => {
            let z = 2.0 * unit_f64(rng) - 1.0;
            let phi = TAU * unit_f64(rng);
            let s = (1.0 - z * z).max(0.0).sqrt();
            Vec3::new(s * phi.cos(), s * phi.sin(), z) * radius
        }
        Primitive::Cylinder { radius, height } => {
            let side = TAU * radius * height;
            let cap = PI * radius * radius;
            let pick = unit_f64(rng) * (side + 2.0 * cap);
            if pick < side {
                let a = TAU * unit_f64(rng);
                Vec3::new(radius * a.cos(), radius * a.sin(), (unit_f64(rng) - 0.5) * height)
            } else {
                let (x, y) = disk(rng, radius);
                let z = if pick < side + cap { 0.5 * height } else { -0.5 * height };
                Vec3::new(x, y, z)
            }
        }
        Primitive::Cone { radius, height } => {
            let lateral = PI * radius * radius.hypot(height);
            let base = PI * radius * radius;
            if unit_f64(rng) * (lateral + base) < lateral {
                // fraction of the way from apex to base; lateral area grows with v^2
                let v = unit_f64(rng).sqrt();
                let a = TAU * unit_f64(rng);
                let r = radius * v;
                Vec3::new(r * a.cos(), r * a.sin(), 0.5 * height - height * v)
            } else {
                let (x, y) = disk(rng, radius);
                Vec3::new(x, y, -0.5 * height)
            }
        }
        Primitive::Torus { major_radius, minor_radius } => {
            // tube angle density is proportional to R + r cos(phi)
            let phi = loop {
                let phi = TAU * unit_f64(rng);
                let accept = unit_f64(rng) * (major_radius + minor_radius);
                if accept <= major_radius + minor_radius * phi.cos() {
                    break phi;
                }
            };
            let theta = TAU * unit_f64(rng);
            let ring = major_radius + minor_radius * phi.cos();
            Vec3::new(ring * theta.cos(), ring * theta.sin(), minor_radius * phi.sin())
        }
    }
}

/// `n` surface points; each point's part is drawn with probability proportional
/// to analytic part area, then the point is placed parametrically on that part.
pub fn sample_surface_points(program: &SceneProgram, n: usize, seed: u64) -> Result<PointCloud, RenderError> {
    if program.parts.is_empty() {
        return Err(RenderError::EmptyScene);
    }
    let areas: Vec<f64> = program.parts.iter().map(|p| surface_area(&p.primitive)).collect();
    let total: f64 = areas.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(RenderError::InvalidScene("surface area must be positive and finite".into()));
    }
    let mut cdf = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a / total;
        cdf.push(acc);
    }
    let rotations: Vec<_> = program.parts.iter().map(|p| p.pose.rotation_matrix()).collect();
    let mut rng = rng_for(seed, 0x5A3_9E);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u = unit_f64(&mut rng);
        let i = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
        let part = &program.parts[i];
        let local = sample_local(&part.primitive, &mut rng);
        points.push(rotations[i] * local + part.pose.position);
        labels.push(i);
    }
    Ok(PointCloud { points, labels: Some(labels) })
}

/// Analytic part centroids. Every primitive is symmetric about its pose origin
/// except the cone, whose volumetric centroid sits a quarter of the height
/// above its base.
pub fn part_centroids(program: &SceneProgram) -> LabeledCentroids {
    LabeledCentroids {
        entries: program
            .parts
            .iter()
            .map(|p| {
                let centroid = match p.primitive {
                    Primitive::Cone { height, .. } => p.pose.to_world(&Vec3::new(0.0, 0.0, -0.25 * height)),
                    _ => p.pose.position,
                };
                super::sample::LabeledCentroid { label: p.label.clone(), centroid }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::sdf::SceneSdf;
    use crate::scene::parse_program;

    #[test]
    fn sphere_samples_on_surface() {
        let p = parse_program("part \"s\" { sphere 1 pos [0,0,0] rot [0,0,0] }").unwrap();
        let cloud = sample_surface_points(&p, 5000, 3).unwrap();
        assert_eq!(cloud.len(), 5000);
        assert!(cloud.points.iter().all(|x| (x.norm() - 1.0).abs() <= 1e-9));
        assert_eq!(cloud, sample_surface_points(&p, 5000, 3).unwrap());
    }

    #[test]
    fn torus_samples_keep_tube_radius() {
        let p = parse_program("part \"t\" { torus 2 0.5 pos [0,0,0] rot [0,0,0] }").unwrap();
        let cloud = sample_surface_points(&p, 5000, 9).unwrap();
        for x in &cloud.points {
            let ring = Vec3::new(x.x, x.y, 0.0).normalize() * 2.0;
            assert!(((x - ring).norm() - 0.5).abs() <= 1e-9);
        }
    }

    #[test]
    fn samples_lie_on_posed_parts() {
        let p = parse_program(
            "part \"a\" { cuboid dims [1,2,0.5] pos [1,2,3] rot [0.3,-0.4,2.0] }
             part \"b\" { cylinder 0.3 1.2 pos [-1,0,0] rot [1.0,0.2,0] }
             part \"c\" { cone 0.4 0.9 pos [0,-2,1] rot [0,0.7,0.1] }
             part \"d\" { torus 0.6 0.15 pos [2,-1,0] rot [0.5,0.5,0.5] }
             part \"e\" { sphere 0.7 pos [0,0,-3] rot [3,0,0] }",
        )
        .unwrap();
        let sdf = SceneSdf::new(&p);
        let cloud = sample_surface_points(&p, 20_000, 1).unwrap();
        for (x, &l) in cloud.points.iter().zip(cloud.labels.as_ref().unwrap()) {
            let d = sdf.parts[l].distance(x);
            assert!(d.abs() <= 1e-9, "part {l}: {d}");
        }
    }

    #[test]
    fn centroids() {
        let p = parse_program(
            "part \"Seat\" { cuboid dims [0.6,0.6,0.1] pos [0.3,0.3,0.5] rot [0,0,0] }
             part \"Ball\" { sphere 1 pos [1,2,3] rot [0.4,1.1,-2.5] }
             part \"Cone\" { cone 0.5 1 pos [0,0,0] rot [0,0,0] }
             part \"Tip\" { cone 0.5 1 pos [1,0,0] rot [3.141592653589793,0,0] }",
        )
        .unwrap();
        let c = part_centroids(&p);
        assert_eq!(c.get("Seat"), Some(Vec3::new(0.3, 0.3, 0.5)));
        assert_eq!(c.get("Ball"), Some(Vec3::new(1.0, 2.0, 3.0)));
        assert_eq!(c.get("Cone"), Some(Vec3::new(0.0, 0.0, -0.25)));
        assert!((c.get("Tip").unwrap() - Vec3::new(1.0, 0.0, 0.25)).norm() < 1e-12);
    }

    #[test]
    fn cone_volumetric_centroid_by_quadrature() {
        // slices of radius r(z) = R (h/2 - z) / h, z in [-h/2, h/2]
        let (r, h) = (0.5, 1.0);
        let n = 200_000;
        let (mut m, mut mz) = (0.0, 0.0);
        for i in 0..n {
            let z = -h / 2.0 + (i as f64 + 0.5) * h / n as f64;
            let rad = r * (h / 2.0 - z) / h;
            m += rad * rad;
            mz += rad * rad * z;
        }
        assert!((mz / m - (-0.25)).abs() < 1e-6);
    }

    #[test]
    fn empty_scene_rejected() {
        assert_eq!(sample_surface_points(&SceneProgram::default(), 10, 0), Err(RenderError::EmptyScene));
    }
}
