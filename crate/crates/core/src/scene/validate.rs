use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SceneProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    EmptyProgram,
    EmptyLabel,
    DuplicateLabel,
    NonPositiveDimension,
    NonFinite,
    AlbedoOutOfRange,
    /// Torus tube radius must be smaller than the ring radius.
    SelfIntersecting,
}

/// One violated invariant, naming the offending part and field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub part: String,
    pub field: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, part: impl Into<String>, field: impl Into<String>) -> Self {
        Diagnostic { kind, part: part.into(), field: field.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({:?}, {:?})", self.kind, self.part, self.field)
    }
}

/// Checks every program invariant. An empty list means the program is renderable.
pub fn validate(program: &SceneProgram) -> Vec<Diagnostic> {
    use DiagnosticKind::*;

    let mut out = Vec::new();
    if program.parts.is_empty() {
        out.push(Diagnostic::new(EmptyProgram, "", "parts"));
    }
    if let Some(canvas) = &program.canvas {
        for (axis, v) in ["canvas.x", "canvas.y", "canvas.z"].iter().zip(canvas.iter()) {
            if !v.is_finite() {
                out.push(Diagnostic::new(NonFinite, "canvas", *axis));
            } else if *v <= 0.0 {
                out.push(Diagnostic::new(NonPositiveDimension, "canvas", *axis));
            }
        }
    }

    let mut seen = HashSet::new();
    for part in &program.parts {
        let label = part.label.as_str();
        if label.trim().is_empty() {
            out.push(Diagnostic::new(EmptyLabel, label, "label"));
        } else if !seen.insert(label) {
            out.push(Diagnostic::new(DuplicateLabel, label, "label"));
        }
        for (field, v) in part.primitive.params() {
            if !v.is_finite() {
                out.push(Diagnostic::new(NonFinite, label, field));
            } else if v <= 0.0 {
                out.push(Diagnostic::new(NonPositiveDimension, label, field));
            }
        }
        if let super::Primitive::Torus { major_radius, minor_radius } = part.primitive {
            if minor_radius > 0.0 && major_radius > 0.0 && minor_radius >= major_radius {
                out.push(Diagnostic::new(SelfIntersecting, label, "minor_radius"));
            }
        }
        for (prefix, v) in [("pos", &part.pose.position), ("rot", &part.pose.rotation)] {
            for (axis, c) in ["x", "y", "z"].iter().zip(v.iter()) {
                if !c.is_finite() {
                    out.push(Diagnostic::new(NonFinite, label, format!("{prefix}.{axis}")));
                }
            }
        }
        for (ch, c) in ["r", "g", "b"].iter().zip(part.material.albedo) {
            if !c.is_finite() {
                out.push(Diagnostic::new(NonFinite, label, format!("rgb.{ch}")));
            } else if !(0.0..=1.0).contains(&c) {
                out.push(Diagnostic::new(AlbedoOutOfRange, label, format!("rgb.{ch}")));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::scene::parse_program;
    use crate::scene::Primitive;

    const CHAIR: &str = r#"
        part "Leg1" { cuboid dims [0.065, 0.065, 0.45] pos [0.04, 0.0325, 0.23] rot [0, 0, 0] }
        part "Leg2" { cuboid dims [0.065, 0.065, 0.45] pos [0.5, 0.0325, 0.23] rot [0, 0, 0] }
        part "Seat" { cuboid dims [0.6, 0.6, 0.1] pos [0.3, 0.3, 0.5] rot [0, 0, 0] }
        part "Backrest" { cuboid dims [0.1, 0.6, 0.45] pos [0.05, 0.3, 0.775] rot [0, 0, 0] }
    "#;

    #[test]
    fn valid_chair_has_no_diagnostics() {
        assert!(validate(&parse_program(CHAIR).unwrap()).is_empty());
    }

    #[test]
    fn zero_dim_is_reported_by_field() {
        let mut p = parse_program(CHAIR).unwrap();
        let seat = p.parts.iter_mut().find(|x| x.label == "Seat").unwrap();
        seat.primitive = Primitive::Cuboid { dims: Vec3::new(0.0, 1.0, 1.0) };
        assert_eq!(
            validate(&p),
            vec![Diagnostic::new(DiagnosticKind::NonPositiveDimension, "Seat", "dims.x")]
        );
    }

    #[test]
    fn nan_position_is_non_finite() {
        let mut p = parse_program(CHAIR).unwrap();
        p.parts[0].pose.position.y = f64::NAN;
        assert_eq!(validate(&p), vec![Diagnostic::new(DiagnosticKind::NonFinite, "Leg1", "pos.y")]);
    }

    #[test]
    fn duplicates_empty_and_albedo() {
        let mut p = parse_program(CHAIR).unwrap();
        p.parts[1].label = "Leg1".into();
        p.parts[2].label = " ".into();
        p.parts[3].material.albedo = [0.0, 1.5, 0.0];
        let kinds: Vec<_> = validate(&p).into_iter().map(|d| d.kind).collect();
        assert_eq!(
            kinds,
            vec![DiagnosticKind::DuplicateLabel, DiagnosticKind::EmptyLabel, DiagnosticKind::AlbedoOutOfRange]
        );
        assert_eq!(validate(&SceneProgram::default())[0].kind, DiagnosticKind::EmptyProgram);
    }
}
