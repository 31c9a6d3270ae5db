use std::collections::HashSet;

use super::lexer::{tokenize, Tok, Token};
use super::{Material, ParseError, PartNode, Pose, Primitive, SceneProgram};
use crate::math::Vec3;

/// Parses ProtoScene source text.
///
/// A program needs at least one `part`. Labels must be unique, primitive
/// parameters and canvas extents strictly positive, and `rgb` channels in `[0, 1]`.
pub fn parse_program(text: &str) -> Result<SceneProgram, ParseError> {
    let tokens = tokenize(text)?;
    Parser { tokens, pos: 0 }.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError::Syntax {
            line: t.line,
            column: t.column,
            expected: expected.to_string(),
            found: t.tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Token, ParseError> {
        if self.peek().tok == tok {
            Ok(self.next())
        } else {
            Err(self.error(expected))
        }
    }

    fn keyword(&mut self, word: &str) -> Result<Token, ParseError> {
        match &self.peek().tok {
            Tok::Word(w) if w == word => Ok(self.next()),
            _ => Err(self.error(&format!("`{word}`"))),
        }
    }

    fn number(&mut self) -> Result<(f64, Token), ParseError> {
        match self.peek().tok {
            Tok::Num(v) => Ok((v, self.next())),
            _ => Err(self.error("number")),
        }
    }

    fn vec3(&mut self) -> Result<(Vec3, [Token; 3]), ParseError> {
        self.expect(Tok::LBracket, "`[`")?;
        let (x, tx) = self.number()?;
        self.expect(Tok::Comma, "`,`")?;
        let (y, ty) = self.number()?;
        self.expect(Tok::Comma, "`,`")?;
        let (z, tz) = self.number()?;
        self.expect(Tok::RBracket, "`]`")?;
        Ok((Vec3::new(x, y, z), [tx, ty, tz]))
    }

    fn program(mut self) -> Result<SceneProgram, ParseError> {
        let mut program = SceneProgram::default();
        let mut seen = HashSet::new();
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Eof => break,
                Tok::Word(w) if w == "canvas" => {
                    if program.canvas.is_some() {
                        return Err(self.error("`part` (canvas already declared)"));
                    }
                    self.next();
                    let (v, toks) = self.vec3()?;
                    for ((field, value), tok) in ["canvas.x", "canvas.y", "canvas.z"].iter().zip(v.iter()).zip(&toks) {
                        if *value <= 0.0 {
                            return Err(ParseError::NonPositiveDimension {
                                label: "canvas".into(),
                                field: field.to_string(),
                                line: tok.line,
                                column: tok.column,
                            });
                        }
                    }
                    program.canvas = Some(v);
                }
                Tok::Word(w) if w == "part" => {
                    let part = self.part()?;
                    if !seen.insert(part.label.clone()) {
                        return Err(ParseError::DuplicateLabel { label: part.label, line: t.line, column: t.column });
                    }
                    program.parts.push(part);
                }
                _ => return Err(self.error("`part` or `canvas`")),
            }
        }
        if program.parts.is_empty() {
            return Err(self.error("`part`"));
        }
        Ok(program)
    }

    fn part(&mut self) -> Result<PartNode, ParseError> {
        self.keyword("part")?;
        let label = match &self.peek().tok {
            Tok::Str(s) if !s.trim().is_empty() => s.clone(),
            Tok::Str(_) => return Err(self.error("non-empty part label")),
            _ => return Err(self.error("part label string")),
        };
        self.next();
        self.expect(Tok::LBrace, "`{`")?;
        let primitive = self.primitive(&label)?;
        self.keyword("pos")?;
        let (position, _) = self.vec3()?;
        self.keyword("rot")?;
        let (rotation, _) = self.vec3()?;
        let mut material = Material::default();
        if matches!(&self.peek().tok, Tok::Word(w) if w == "rgb") {
            self.next();
            let (rgb, toks) = self.vec3()?;
            for (i, (c, tok)) in rgb.iter().zip(&toks).enumerate() {
                if !(0.0..=1.0).contains(c) {
                    return Err(ParseError::OutOfRange {
                        label,
                        field: format!("rgb.{}", ["r", "g", "b"][i]),
                        line: tok.line,
                        column: tok.column,
                    });
                }
            }
            material.albedo = [rgb.x, rgb.y, rgb.z];
        }
        self.expect(Tok::RBrace, "`}` or `rgb`")?;
        Ok(PartNode { label, primitive, pose: Pose::new(position, rotation), material })
    }

    fn positive(&mut self, label: &str, field: &str) -> Result<f64, ParseError> {
        let (v, tok) = self.number()?;
        check_positive(label, field, v, &tok)?;
        Ok(v)
    }

    fn primitive(&mut self, label: &str) -> Result<Primitive, ParseError> {
        let kind = match &self.peek().tok {
            Tok::Word(w) => w.clone(),
            _ => return Err(self.error("primitive kind")),
        };
        let prim = match kind.as_str() {
            "cuboid" => {
                self.next();
                self.keyword("dims")?;
                let (dims, toks) = self.vec3()?;
                for ((field, v), tok) in ["dims.x", "dims.y", "dims.z"].iter().zip(dims.iter()).zip(&toks) {
                    check_positive(label, field, *v, tok)?;
                }
                Primitive::Cuboid { dims }
            }
            "cylinder" => {
                self.next();
                let radius = self.positive(label, "radius")?;
                let height = self.positive(label, "height")?;
                Primitive::Cylinder { radius, height }
            }
            "sphere" => {
                self.next();
                Primitive::Sphere { radius: self.positive(label, "radius")? }
            }
            "cone" => {
                self.next();
                let radius = self.positive(label, "radius")?;
                let height = self.positive(label, "height")?;
                Primitive::Cone { radius, height }
            }
            "torus" => {
                self.next();
                let major_radius = self.positive(label, "major_radius")?;
                let (minor_radius, tok) = self.number()?;
                check_positive(label, "minor_radius", minor_radius, &tok)?;
                if minor_radius >= major_radius {
                    return Err(ParseError::SelfIntersecting {
                        label: label.to_string(),
                        line: tok.line,
                        column: tok.column,
                    });
                }
                Primitive::Torus { major_radius, minor_radius }
            }
            _ => return Err(self.error("primitive kind (cuboid, cylinder, sphere, cone, torus)")),
        };
        Ok(prim)
    }
}

fn check_positive(label: &str, field: &str, v: f64, tok: &Token) -> Result<(), ParseError> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(ParseError::NonPositiveDimension {
            label: label.to_string(),
            field: field.to_string(),
            line: tok.line,
            column: tok.column,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_part_seat() {
        let p = parse_program(r#"part "Seat" { cuboid dims [0.6,0.6,0.1] pos [0.3,0.3,0.5] rot [0,0,0] }"#).unwrap();
        assert_eq!(p.parts.len(), 1);
        let seat = &p.parts[0];
        assert_eq!(seat.label, "Seat");
        assert_eq!(seat.primitive, Primitive::Cuboid { dims: Vec3::new(0.6, 0.6, 0.1) });
        assert_eq!(seat.pose.position, Vec3::new(0.3, 0.3, 0.5));
        assert_eq!(seat.pose.rotation, Vec3::zeros());
        assert_eq!(seat.material, Material::default());
        assert_eq!(p.canvas, None);
    }

    #[test]
    fn empty_text_is_syntax_error_on_line_one() {
        match parse_program("") {
            Err(ParseError::Syntax { line: 1, expected, .. }) => assert!(expected.contains("part")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_program("  # only a comment"), Err(ParseError::Syntax { line: 1, .. })));
    }

    #[test]
    fn duplicate_label() {
        let src = "part \"Leg1\" { sphere 1 pos [0,0,0] rot [0,0,0] }\npart \"Leg1\" { sphere 1 pos [3,0,0] rot [0,0,0] }";
        assert_eq!(
            parse_program(src),
            Err(ParseError::DuplicateLabel { label: "Leg1".into(), line: 2, column: 1 })
        );
    }

    #[test]
    fn non_positive_dimension_is_positioned() {
        let src = "part \"Seat\" {\n  cuboid dims [0, 1, 1] pos [0,0,0] rot [0,0,0] }";
        assert_eq!(
            parse_program(src),
            Err(ParseError::NonPositiveDimension { label: "Seat".into(), field: "dims.x".into(), line: 2, column: 16 })
        );
        assert!(matches!(
            parse_program("part \"T\" { torus 1 -0.5 pos [0,0,0] rot [0,0,0] }"),
            Err(ParseError::NonPositiveDimension { field, .. }) if field == "minor_radius"
        ));
        assert!(matches!(
            parse_program("canvas [1, 0, 1] part \"S\" { sphere 1 pos [0,0,0] rot [0,0,0] }"),
            Err(ParseError::NonPositiveDimension { field, .. }) if field == "canvas.y"
        ));
    }

    #[test]
    fn all_kinds_with_material_and_comments() {
        let src = r#"
            # chair-ish
            canvas [0.45, 0.45, 1.0]
            part "a" { cuboid dims [1,2,3] pos [0,0,0] rot [0,0,0] rgb [0.1, 0.2, 0.3] }
            part "b" { cylinder 0.5 2 pos [1,0,0] rot [1.5707963267948966,0,0] }
            part "c" { sphere 0.25 pos [0,1,0] rot [0,0,0] } # trailing
            part "d" { cone 0.5 1 pos [0,0,1] rot [0,0,0] }
            part "e" { torus 2 0.5 pos [0,0,-1] rot [0,0,0] }
        "#;
        let p = parse_program(src).unwrap();
        assert_eq!(p.canvas, Some(Vec3::new(0.45, 0.45, 1.0)));
        assert_eq!(p.labels(), vec!["a", "b", "c", "d", "e"]);
        assert_eq!(p.parts[0].material.albedo, [0.1, 0.2, 0.3]);
        assert_eq!(p.parts[4].primitive, Primitive::Torus { major_radius: 2.0, minor_radius: 0.5 });
    }

    #[test]
    fn rotations_are_normalized_on_parse() {
        let p = parse_program("part \"r\" { sphere 1 pos [0,0,0] rot [9.42477796076938, 0, -4] }").unwrap();
        let r = p.parts[0].pose.rotation;
        assert!((r.x - std::f64::consts::PI).abs() < 1e-12);
        assert!((r.z - (-4.0 + std::f64::consts::TAU)).abs() < 1e-12);
    }

    #[test]
    fn structural_errors() {
        let cases = [
            ("part", 1, 5),
            ("part \"x\" { sphere 1 pos [0,0] rot [0,0,0] }", 1, 29),
            ("part \"x\" { blob 1 pos [0,0,0] rot [0,0,0] }", 1, 12),
            ("part \"x\" { sphere 1 rot [0,0,0] pos [0,0,0] }", 1, 21),
            ("part \"\" { sphere 1 pos [0,0,0] rot [0,0,0] }", 1, 6),
            ("part \"x\" { sphere 1 pos [0,0,0] rot [0,0,0] rgb [2,0,0] }", 1, 50),
            ("sphere", 1, 1),
            ("canvas [1,1,1] canvas [1,1,1]", 1, 16),
            ("canvas [1,1,1]", 1, 15),
            ("part \"t\" { torus 1 2 pos [0,0,0] rot [0,0,0] }", 1, 20),
        ];
        for (src, line, column) in cases {
            let err = parse_program(src).unwrap_err();
            assert_eq!(err.position(), (line, column), "{src}: {err}");
        }
    }
}
