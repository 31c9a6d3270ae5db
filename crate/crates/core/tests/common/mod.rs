//! Shared generators and independent oracles for the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::Matrix3;
use proptest::prelude::*;
use proto3d::math::{euler_xyz, Vec3};
use proto3d::render::{render_views, Camera, LightRig, RenderMode, SceneBounds, TraceSettings};
use proto3d::scene::{parse_program, serialize_program, validate, Material, PartNode, Pose, Primitive, SceneProgram};
use rand::Rng;

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

// ---------------------------------------------------------------- programs

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![1e-6..1e-3, 1e-3..10.0f64, 10.0..1e4f64, Just(0.1), Just(1.0)]
}

fn coord() -> impl Strategy<Value = f64> {
    prop_oneof![-100.0..100.0f64, Just(0.0), Just(-0.0), -1e-7..1e-7f64]
}

fn angle() -> impl Strategy<Value = f64> {
    prop_oneof![(-PI..PI).prop_map(|a| if a == -PI { PI } else { a }), Just(PI), Just(0.0), Just(PI / 2.0)]
}

fn vec3<S: Strategy<Value = f64>>(s: fn() -> S) -> impl Strategy<Value = Vec3> {
    (s(), s(), s()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

pub fn primitive() -> impl Strategy<Value = Primitive> {
    prop_oneof![
        vec3(positive).prop_map(|dims| Primitive::Cuboid { dims }),
        (positive(), positive()).prop_map(|(radius, height)| Primitive::Cylinder { radius, height }),
        positive().prop_map(|radius| Primitive::Sphere { radius }),
        (positive(), positive()).prop_map(|(radius, height)| Primitive::Cone { radius, height }),
        (positive(), 0.01..0.99f64)
            .prop_map(|(major, f)| Primitive::Torus { major_radius: major, minor_radius: major * f }),
    ]
}

fn unit() -> std::ops::RangeInclusive<f64> {
    0.0..=1.0
}

fn label() -> impl Strategy<Value = String> {
    prop_oneof![
        "[A-Za-z][A-Za-z0-9_ ]{0,12}",
        "[a-z]{1,4}[\"\\\\#{}\\[\\]]{1,3}[a-z]{0,3}",
        "[\u{00e9}\u{4e2d}\u{1f600}a-z]{1,6}",
    ]
}

pub fn part() -> impl Strategy<Value = PartNode> {
    (label(), primitive(), vec3(coord), vec3(angle), proptest::option::of(vec3(unit))).prop_map(
        |(label, primitive, position, rotation, rgb)| PartNode {
            label,
            primitive,
            pose: Pose { position, rotation },
            material: rgb.map_or_else(Material::default, |c| Material { albedo: [c.x, c.y, c.z] }),
        },
    )
}

/// Valid programs: 1 to 8 parts with unique labels, optional canvas.
pub fn program() -> impl Strategy<Value = SceneProgram> {
    (proptest::collection::vec(part(), 1..8), proptest::option::of(vec3(positive))).prop_map(|(parts, canvas)| {
        let mut seen = std::collections::HashSet::new();
        let parts = parts
            .into_iter()
            .enumerate()
            .map(|(i, mut p)| {
                if !seen.insert(p.label.clone()) {
                    p.label = format!("{}#{i}", p.label);
                    seen.insert(p.label.clone());
                }
                p
            })
            .collect();
        SceneProgram { parts, canvas }
    })
}

// ---------------------------------------------------------------- scenes

/// One to six spheres, cuboids and cylinders at random poses, with bounding
/// spheres at least 0.05 apart.
pub fn non_overlapping_scene(rng: &mut impl Rng) -> SceneProgram {
    let n = rng.random_range(1..=6);
    let mut parts: Vec<PartNode> = Vec::new();
    let mut placed: Vec<(Vec3, f64)> = Vec::new();
    let mut attempts = 0;
    while parts.len() < n && attempts < 200 {
        attempts += 1;
        let primitive = match rng.random_range(0..3) {
            0 => Primitive::Sphere { radius: rng.random_range(0.15..0.5) },
            1 => Primitive::Cuboid {
                dims: Vec3::new(rng.random_range(0.15..0.8), rng.random_range(0.15..0.8), rng.random_range(0.15..0.8)),
            },
            _ => Primitive::Cylinder { radius: rng.random_range(0.1..0.4), height: rng.random_range(0.2..0.8) },
        };
        let r = primitive.bounding_radius();
        let c = Vec3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0));
        if placed.iter().any(|(q, rq)| (c - q).norm() < r + rq + 0.05) {
            continue;
        }
        placed.push((c, r));
        let rotation = Vec3::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        parts.push(PartNode {
            label: format!("p{}", parts.len()),
            primitive,
            pose: Pose::new(c, rotation),
            material: Material { albedo: [rng.random(), rng.random(), rng.random()] },
        });
    }
    SceneProgram { parts, canvas: None }
}

// ---------------------------------------------------------------- analytic ray casting

fn solve_quadratic(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    if a.abs() < 1e-300 {
        if b.abs() < 1e-300 {
            return None;
        }
        let t = -c / b;
        return Some((t, t));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let q = -0.5 * (b + b.signum() * s);
    let (t0, t1) = (q / a, if q != 0.0 { c / q } else { -b / (2.0 * a) });
    Some((t0.min(t1), t0.max(t1)))
}

/// First positive intersection of a local-frame ray with the primitive grown
/// (δ > 0) or shrunk (δ < 0) by `delta`.
fn local_hit(prim: &Primitive, o: &Vec3, d: &Vec3, delta: f64) -> Option<f64> {
    let first = |ts: &[f64]| ts.iter().copied().filter(|t| *t > 0.0).fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.min(t))));
    match *prim {
        Primitive::Sphere { radius } => {
            let r = radius + delta;
            let (t0, t1) = solve_quadratic(d.dot(d), 2.0 * o.dot(d), o.dot(o) - r * r)?;
            first(&[t0, t1])
        }
        Primitive::Cuboid { dims } => {
            let h = dims * 0.5 + Vec3::repeat(delta);
            let (mut tmin, mut tmax) = (f64::NEG_INFINITY, f64::INFINITY);
            for k in 0..3 {
                if d[k].abs() < 1e-300 {
                    if o[k].abs() > h[k] {
                        return None;
                    }
                    continue;
                }
                let (a, b) = ((-h[k] - o[k]) / d[k], (h[k] - o[k]) / d[k]);
                tmin = tmin.max(a.min(b));
                tmax = tmax.min(a.max(b));
            }
            if tmin > tmax {
                return None;
            }
            first(&[tmin, tmax])
        }
        Primitive::Cylinder { radius, height } => {
            let (r, hz) = (radius + delta, 0.5 * height + delta);
            let mut ts = Vec::new();
            if let Some((t0, t1)) = solve_quadratic(d.x * d.x + d.y * d.y, 2.0 * (o.x * d.x + o.y * d.y), o.x * o.x + o.y * o.y - r * r) {
                ts.extend([t0, t1].into_iter().filter(|t| (o.z + t * d.z).abs() <= hz));
            }
            if d.z.abs() > 1e-300 {
                for z in [-hz, hz] {
                    let t = (z - o.z) / d.z;
                    let p = o + d * t;
                    if p.x * p.x + p.y * p.y <= r * r {
                        ts.push(t);
                    }
                }
            }
            first(&ts)
        }
        _ => unimplemented!("oracle covers spheres, cuboids and cylinders"),
    }
}

fn rotations(program: &SceneProgram) -> Vec<Matrix3<f64>> {
    program.parts.iter().map(|p| euler_xyz(&p.pose.rotation)).collect()
}

/// Index and distance of the first part hit by the ray.
pub fn nearest_hit(program: &SceneProgram, origin: &Vec3, dir: &Vec3, delta: f64) -> Option<(usize, f64)> {
    let rots = rotations(program);
    program
        .parts
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let rt = rots[i].transpose();
            local_hit(&p.primitive, &(rt * (origin - p.pose.position)), &(rt * dir), delta).map(|t| (i, t))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

#[derive(Debug, Clone, PartialEq)]
pub enum PixelTruth {
    /// No silhouette inside the pixel footprint: the hit part (1-based) or 0.
    Robust(u8),
    /// A silhouette crosses the pixel or passes within `delta` of its centre
    /// ray: any of these labels is acceptable.
    Grazing(Vec<u8>),
}

/// Primary ray through continuous image coordinates (`x + 0.5` is the
/// centre of column `x`), derived from the pinhole model directly.
pub fn ray_at(camera: &Camera, px: f64, py: f64) -> Vec3 {
    let forward = (camera.target - camera.position).normalize();
    let right = forward.cross(&camera.up).normalize();
    let up = right.cross(&forward);
    let half = (0.5 * camera.vertical_fov).tan();
    let aspect = camera.width as f64 / camera.height as f64;
    let u = (2.0 * px / camera.width as f64 - 1.0) * aspect * half;
    let v = (1.0 - 2.0 * py / camera.height as f64) * half;
    (forward + right * u + up * v).normalize()
}

pub fn pixel_truth(program: &SceneProgram, camera: &Camera, x: u32, y: u32, delta: f64) -> PixelTruth {
    let label = |h: Option<(usize, f64)>| h.map_or(0, |(i, _)| i as u8 + 1);
    let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
    let centre = ray_at(camera, cx, cy);
    let mut labels = vec![
        label(nearest_hit(program, &camera.position, &centre, delta)),
        label(nearest_hit(program, &camera.position, &centre, -delta)),
    ];
    for (dx, dy) in [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)] {
        labels.push(label(nearest_hit(program, &camera.position, &ray_at(camera, cx + dx, cy + dy), 0.0)));
    }
    labels.sort_unstable();
    labels.dedup();
    if labels.len() == 1 {
        PixelTruth::Robust(labels[0])
    } else {
        PixelTruth::Grazing(labels)
    }
}

// ---------------------------------------------------------------- misc oracles

pub fn brute_nn(a: &[Vec3], b: &[Vec3]) -> Vec<f64> {
    a.iter().map(|p| b.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min).sqrt()).collect()
}

pub fn brute_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    0.5 * (mean(brute_nn(a, b)) + mean(brute_nn(b, a)))
}

pub fn brute_hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    max(brute_nn(a, b)).max(max(brute_nn(b, a)))
}

/// Uniformly random rotation from a random unit quaternion.
pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    loop {
        let q = nalgebra::Vector4::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 0.1 && n <= 1.0 {
            let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q.x, q.y, q.z, q.w));
            return *q.to_rotation_matrix().matrix();
        }
    }
}

pub fn random_points(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| Vec3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
        .collect()
}

/// Horn's closed-form similarity via the quaternion eigenproblem, used as a
/// registration oracle independent of the SVD path.
pub fn horn_similarity(src: &[Vec3], dst: &[Vec3]) -> (f64, Matrix3<f64>, Vec3) {
    let n = src.len() as f64;
    let ms = src.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let md = dst.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut m = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        m += (s - ms) * (d - md).transpose();
    }
    let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    #[rustfmt::skip]
    let nmat = nalgebra::Matrix4::new(
        sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
        syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
        szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
        sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz,
    );
    let eig = nmat.symmetric_eigen();
    let k = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(k);
    let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(v[0], v[1], v[2], v[3]));
    let r = *q.to_rotation_matrix().matrix();
    let var_s: f64 = src.iter().map(|s| (s - ms).norm_squared()).sum();
    let num: f64 = src.iter().zip(dst).map(|(s, d)| (d - md).dot(&(r * (s - ms)))).sum();
    let scale = num / var_s;
    (scale, r, md - scale * (r * ms))
}

// ---------------------------------------------------------------- renderer oracle

pub const MASK_RES: u32 = 40;

pub struct MaskStats {
    pub robust_hits: usize,
    pub grazing: usize,
}

/// Checks every pixel of mask and depth renders against the analytic oracle.
pub fn check_mask_scene(program: &SceneProgram, cameras: &[Camera]) -> MaskStats {
    let bounds = SceneBounds::of(program).unwrap();
    let eps = TraceSettings::for_bounds(&bounds).epsilon;
    let delta = 10.0 * eps;
    let views = render_views(program, cameras, &LightRig::flat(), &[RenderMode::Mask, RenderMode::Depth]).unwrap();
    let mut stats = MaskStats { robust_hits: 0, grazing: 0 };
    for pair in views.chunks(2) {
        let (mask, depth, cam) = (&pair[0].image, &pair[1].image, &pair[0].camera);
        for y in 0..cam.height {
            for x in 0..cam.width {
                let (m, d) = (mask.mask(x, y).unwrap(), depth.depth(x, y).unwrap());
                assert_eq!(m != 0, d.is_finite() && d > 0.0, "mask/depth disagree at ({x},{y})");
                match pixel_truth(program, cam, x, y, delta) {
                    PixelTruth::Robust(label) => {
                        assert_eq!(m, label, "pixel ({x},{y}) of {program:?} from {:?}", cam.position);
                        if label != 0 {
                            stats.robust_hits += 1;
                            let dir = cam.ray_direction(x, y);
                            let outer = nearest_hit(program, &cam.position, &dir, delta).unwrap().1;
                            let inner = nearest_hit(program, &cam.position, &dir, -delta).unwrap().1;
                            assert!(d >= outer - eps && d <= inner + eps, "depth {d} outside [{outer}, {inner}]");
                        }
                    }
                    PixelTruth::Grazing(labels) => {
                        stats.grazing += 1;
                        assert!(labels.contains(&m), "grazing pixel ({x},{y}) got {m}, expected one of {labels:?}");
                    }
                }
            }
        }
    }
    stats
}

// ---------------------------------------------------------------- parser fuzzing

const ALPHABET: &[u8] = b" \n\t\"\\#[]{},.-+e0123456789partcuboidsylnhrgbpos";

/// One to four byte-level edits: delete, insert, swap, duplicate a span or truncate.
pub fn mutate(text: &str, rng: &mut impl Rng) -> String {
    let mut bytes = text.as_bytes().to_vec();
    for _ in 0..rng.random_range(1..=4) {
        let n = bytes.len();
        match rng.random_range(0..5) {
            0 if n > 0 => {
                bytes.remove(rng.random_range(0..n));
            }
            1 => bytes.insert(rng.random_range(0..=n), ALPHABET[rng.random_range(0..ALPHABET.len())]),
            2 if n > 1 => {
                let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
                bytes.swap(a, b);
            }
            3 if n > 0 => {
                let start = rng.random_range(0..n);
                let end = (start + rng.random_range(1..12)).min(n);
                let span = bytes[start..end].to_vec();
                let at = rng.random_range(0..=bytes.len());
                bytes.splice(at..at, span);
            }
            _ if n > 0 => {
                let cut = rng.random_range(0..n);
                bytes.truncate(cut);
            }
            _ => {}
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

pub fn fuzz_seeds() -> Vec<String> {
    let mut out = vec![std::fs::read_to_string(fixture("chair.psc")).unwrap()];
    out.push("canvas [1, 1, 1]\n# comment\npart \"a \\\"b\\\"\" { torus 1 0.2 pos [0,0,0] rot [0,0,0] }\n".into());
    out.push("part \"C\" { cone 0.5 1 pos [1e-3, -2.5, 3] rot [3.14159, 0, -1] rgb [0, 0.5, 1] }\n".into());
    out.push("part \"S\" { sphere 1 pos [0,0,0] rot [0,0,0] }\npart \"Y\" { cylinder 0.2 2 pos [1,0,0] rot [0,1.5,0] }\n".into());
    out
}

/// Parses one input under `catch_unwind` and checks the outcome: accepted
/// programs validate and round-trip, rejections carry an in-range position.
/// Returns whether the input was accepted.
pub fn check_parse_outcome(input: &str) -> bool {
    let Ok(result) = std::panic::catch_unwind(|| parse_program(input)) else { panic!("parser panicked on {input:?}") };
    match result {
        Ok(p) => {
            assert!(validate(&p).is_empty(), "accepted an invalid program from {input:?}");
            assert_eq!(parse_program(&serialize_program(&p)).as_ref(), Ok(&p));
            true
        }
        Err(e) => {
            let (line, column) = e.position();
            let lines = input.split('\n').count();
            assert!(line >= 1 && line <= lines, "{e} outside {lines} lines of {input:?}");
            assert!(column >= 1, "{e}");
            assert!(e.to_string().starts_with(&format!("line {line}, column {column}:")));
            false
        }
    }
}
