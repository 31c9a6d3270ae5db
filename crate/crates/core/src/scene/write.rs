use std::fmt::Write;

use super::{PartNode, Primitive, SceneProgram};
use crate::math::{normalize_angle, Vec3};

/// Canonical ProtoScene text: one statement per line, canvas first, every
/// part with an explicit `rgb`. Numbers use the shortest decimal form that
/// parses back to the identical `f64`.
pub fn serialize_program(program: &SceneProgram) -> String {
    let mut out = String::new();
    if let Some(canvas) = &program.canvas {
        let _ = writeln!(out, "canvas {}", vec3(canvas));
    }
    for part in &program.parts {
        write_part(&mut out, part);
    }
    out
}

fn write_part(out: &mut String, part: &PartNode) {
    let kind = match &part.primitive {
        Primitive::Cuboid { dims } => format!("cuboid dims {}", vec3(dims)),
        Primitive::Cylinder { radius, height } => format!("cylinder {} {}", num(*radius), num(*height)),
        Primitive::Sphere { radius } => format!("sphere {}", num(*radius)),
        Primitive::Cone { radius, height } => format!("cone {} {}", num(*radius), num(*height)),
        Primitive::Torus { major_radius, minor_radius } => {
            format!("torus {} {}", num(*major_radius), num(*minor_radius))
        }
    };
    let rot = part.pose.rotation.map(normalize_angle);
    let [r, g, b] = part.material.albedo;
    let _ = writeln!(
        out,
        "part {} {{ {} pos {} rot {} rgb [{}, {}, {}] }}",
        quote(&part.label),
        kind,
        vec3(&part.pose.position),
        vec3(&rot),
        num(r),
        num(g),
        num(b)
    );
}

fn quote(label: &str) -> String {
    let mut s = String::with_capacity(label.len() + 2);
    s.push('"');
    for c in label.chars() {
        match c {
            '"' => s.push_str("\\\""),
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            '\t' => s.push_str("\\t"),
            c => s.push(c),
        }
    }
    s.push('"');
    s
}

fn vec3(v: &Vec3) -> String {
    format!("[{}, {}, {}]", num(v.x), num(v.y), num(v.z))
}

pub(crate) fn num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::scene::{parse_program, Material, Pose};

    #[test]
    fn sphere_round_trip() {
        let p = SceneProgram {
            parts: vec![PartNode {
                label: "Ball".into(),
                primitive: Primitive::Sphere { radius: 0.123456789012345 },
                pose: Pose::new(Vec3::new(1e-9, -3.5, 2e20), Vec3::new(0.1, 0.2, 0.3)),
                material: Material { albedo: [0.25, 1.0, 0.0] },
            }],
            canvas: Some(Vec3::new(1.0, 2.0, 3.0)),
        };
        let text = serialize_program(&p);
        assert_eq!(parse_program(&text).unwrap(), p);
    }

    #[test]
    fn rotation_three_pi_prints_as_pi() {
        let p = SceneProgram {
            parts: vec![PartNode {
                label: "r".into(),
                primitive: Primitive::Sphere { radius: 1.0 },
                pose: Pose { position: Vec3::zeros(), rotation: Vec3::new(3.0 * PI, 0.0, 0.0) },
                material: Material::default(),
            }],
            canvas: None,
        };
        let text = serialize_program(&p);
        let back = parse_program(&text).unwrap();
        assert!((back.parts[0].pose.rotation.x - PI).abs() < 1e-12, "{text}");
    }

    #[test]
    fn canonical_layout() {
        let p = parse_program("part \"Seat\" { cuboid dims [0.6,0.6,0.1] pos [0.3,0.3,0.5] rot [0,0,0] }").unwrap();
        assert_eq!(
            serialize_program(&p),
            "part \"Seat\" { cuboid dims [0.6, 0.6, 0.1] pos [0.3, 0.3, 0.5] rot [0, 0, 0] rgb [0.7, 0.7, 0.7] }\n"
        );
    }

    #[test]
    fn labels_are_escaped() {
        let p = SceneProgram {
            parts: vec![PartNode {
                label: "say \"hi\"\\".into(),
                primitive: Primitive::Sphere { radius: 1.0 },
                pose: Pose::at(Vec3::zeros()),
                material: Material::default(),
            }],
            canvas: None,
        };
        assert_eq!(parse_program(&serialize_program(&p)).unwrap(), p);
    }
}
