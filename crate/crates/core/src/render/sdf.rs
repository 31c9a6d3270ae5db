//! Exact signed distance functions for the five primitives, in their local frames.

use nalgebra::{Matrix3, Vector2};

use crate::math::Vec3;
use crate::scene::{PartNode, Primitive, SceneProgram};

pub fn sd_box(p: &Vec3, dims: &Vec3) -> f64 {
    let q = p.abs() - dims * 0.5;
    let outside = q.map(|c| c.max(0.0)).norm();
    outside + q.max().min(0.0)
}

pub fn sd_sphere(p: &Vec3, radius: f64) -> f64 {
    p.norm() - radius
}

pub fn sd_cylinder(p: &Vec3, radius: f64, height: f64) -> f64 {
    let d = Vector2::new(p.xy().norm() - radius, p.z.abs() - 0.5 * height);
    d.x.max(d.y).min(0.0) + d.map(|c| c.max(0.0)).norm()
}

/// Cone with base radius `radius` at `z = -height/2` and apex at `z = +height/2`.
pub fn sd_cone(p: &Vec3, radius: f64, height: f64) -> f64 {
    let h = 0.5 * height;
    let (r1, r2) = (radius, 0.0);
    let q = Vector2::new(p.xy().norm(), p.z);
    let k1 = Vector2::new(r2, h);
    let k2 = Vector2::new(r2 - r1, 2.0 * h);
    let ca = Vector2::new(q.x - q.x.min(if q.y < 0.0 { r1 } else { r2 }), q.y.abs() - h);
    let cb = q - k1 + k2 * ((k1 - q).dot(&k2) / k2.norm_squared()).clamp(0.0, 1.0);
    let s = if cb.x < 0.0 && ca.y < 0.0 { -1.0 } else { 1.0 };
    s * ca.norm_squared().min(cb.norm_squared()).sqrt()
}

pub fn sd_torus(p: &Vec3, major: f64, minor: f64) -> f64 {
    Vector2::new(p.xy().norm() - major, p.z).norm() - minor
}

pub fn sd_primitive(p: &Vec3, prim: &Primitive) -> f64 {
    match *prim {
        Primitive::Cuboid { ref dims } => sd_box(p, dims),
        Primitive::Sphere { radius } => sd_sphere(p, radius),
        Primitive::Cylinder { radius, height } => sd_cylinder(p, radius, height),
        Primitive::Cone { radius, height } => sd_cone(p, radius, height),
        Primitive::Torus { major_radius, minor_radius } => sd_torus(p, major_radius, minor_radius),
    }
}

/// A part with its world-to-local rotation precomputed.
#[derive(Debug, Clone)]
pub struct PlacedPart {
    pub primitive: Primitive,
    pub position: Vec3,
    /// Local-to-world rotation.
    pub rotation: Matrix3<f64>,
    pub bounding_radius: f64,
    pub albedo: [f64; 3],
}

impl PlacedPart {
    pub fn new(part: &PartNode) -> Self {
        PlacedPart {
            primitive: part.primitive.clone(),
            position: part.pose.position,
            rotation: part.pose.rotation_matrix(),
            bounding_radius: part.primitive.bounding_radius(),
            albedo: part.material.albedo,
        }
    }

    pub fn to_local(&self, world: &Vec3) -> Vec3 {
        self.rotation.tr_mul(&(world - self.position))
    }

    pub fn distance(&self, world: &Vec3) -> f64 {
        sd_primitive(&self.to_local(world), &self.primitive)
    }
}

/// Union SDF over all parts of a program.
#[derive(Debug, Clone)]
pub struct SceneSdf {
    pub parts: Vec<PlacedPart>,
}

impl SceneSdf {
    pub fn new(program: &SceneProgram) -> Self {
        SceneSdf { parts: program.parts.iter().map(PlacedPart::new).collect() }
    }

    /// Distance to the nearest part and that part's index. Parts whose bounding
    /// sphere is farther than the current best are skipped; ties keep the lower index.
    pub fn nearest(&self, p: &Vec3) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0usize);
        for (i, part) in self.parts.iter().enumerate() {
            let lower = (p - part.position).norm() - part.bounding_radius;
            if lower >= best.0 {
                continue;
            }
            let d = part.distance(p);
            if d < best.0 {
                best = (d, i);
            }
        }
        best
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.nearest(p).0
    }

    /// Outward surface normal of part `index` near `p` by central differences.
    pub fn normal(&self, index: usize, p: &Vec3, h: f64) -> Vec3 {
        let part = &self.parts[index];
        let mut g = Vec3::zeros();
        for axis in 0..3 {
            let mut e = Vec3::zeros();
            e[axis] = h;
            g[axis] = part.distance(&(p + e)) - part.distance(&(p - e));
        }
        let n = g.norm();
        if n > 0.0 {
            g / n
        } else {
            Vec3::z()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_distances() {
        let dims = Vec3::new(2.0, 4.0, 6.0);
        assert_eq!(sd_box(&Vec3::new(2.0, 0.0, 0.0), &dims), 1.0);
        assert_eq!(sd_box(&Vec3::zeros(), &dims), -1.0);
        assert!((sd_box(&Vec3::new(2.0, 3.0, 0.0), &dims) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cylinder_distances() {
        assert_eq!(sd_cylinder(&Vec3::new(3.0, 0.0, 0.0), 1.0, 2.0), 2.0);
        assert_eq!(sd_cylinder(&Vec3::new(0.0, 0.0, 3.0), 1.0, 2.0), 2.0);
        assert_eq!(sd_cylinder(&Vec3::zeros(), 1.0, 2.0), -1.0);
        assert!((sd_cylinder(&Vec3::new(2.0, 0.0, 2.0), 1.0, 2.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cone_distances() {
        // base radius 1, height 2: base at z=-1, apex at z=+1
        assert!((sd_cone(&Vec3::new(0.0, 0.0, 2.0), 1.0, 2.0) - 1.0).abs() < 1e-12);
        assert!((sd_cone(&Vec3::new(0.0, 0.0, -2.0), 1.0, 2.0) - 1.0).abs() < 1e-12);
        assert!(sd_cone(&Vec3::zeros(), 1.0, 2.0) < 0.0);
        // lateral surface point at mid height: radius 0.5
        assert!(sd_cone(&Vec3::new(0.5, 0.0, 0.0), 1.0, 2.0).abs() < 1e-12);
        // distance from a point straight out from the slanted side
        let n = Vec3::new(2.0, 0.0, 1.0).normalize();
        let p = Vec3::new(0.5, 0.0, 0.0) + n * 0.3;
        assert!((sd_cone(&p, 1.0, 2.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn torus_distances() {
        assert!((sd_torus(&Vec3::new(2.5, 0.0, 0.0), 2.0, 0.5)).abs() < 1e-15);
        assert_eq!(sd_torus(&Vec3::zeros(), 2.0, 0.5), 1.5);
        assert_eq!(sd_torus(&Vec3::new(0.0, 2.0, 0.0), 2.0, 0.5), -0.5);
    }
}
