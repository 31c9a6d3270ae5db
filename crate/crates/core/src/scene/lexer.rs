use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Word(String),
    Str(String),
    Num(f64),
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num(n) => format!("number {n}"),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

fn syntax(line: usize, column: usize, expected: &str, found: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, column, expected: expected.into(), found: found.into() }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
            }
            '[' | ']' | '{' | '}' | ',' => {
                let tok = match c {
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    _ => Tok::Comma,
                };
                out.push(Token { tok, line: tl, column: tc });
                i += 1;
                col += 1;
            }
            '"' => {
                i += 1;
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None | Some('\n') => {
                            return Err(syntax(tl, tc, "closing `\"`", "unterminated string"));
                        }
                        Some('"') => {
                            i += 1;
                            col += 1;
                            break;
                        }
                        Some('\\') => {
                            let esc = match chars.get(i + 1) {
                                Some('"') => '"',
                                Some('\\') => '\\',
                                Some('n') => '\n',
                                Some('t') => '\t',
                                other => {
                                    let found = other.map_or("end of input".to_string(), |c| format!("`\\{c}`"));
                                    return Err(syntax(line, col, "escape sequence (\\\" \\\\ \\n \\t)", found));
                                }
                            };
                            s.push(esc);
                            i += 2;
                            col += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                out.push(Token { tok: Tok::Str(s), line: tl, column: tc });
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = i;
                let bump = |i: &mut usize, col: &mut usize| {
                    *i += 1;
                    *col += 1;
                };
                if c == '-' || c == '+' {
                    bump(&mut i, &mut col);
                }
                let mut digits = 0;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump(&mut i, &mut col);
                    digits += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    bump(&mut i, &mut col);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump(&mut i, &mut col);
                        digits += 1;
                    }
                }
                if digits == 0 {
                    return Err(syntax(tl, tc, "number", format!("`{}`", chars[start..i].iter().collect::<String>())));
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    bump(&mut i, &mut col);
                    if i < chars.len() && (chars[i] == '-' || chars[i] == '+') {
                        bump(&mut i, &mut col);
                    }
                    let mut exp_digits = 0;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump(&mut i, &mut col);
                        exp_digits += 1;
                    }
                    if exp_digits == 0 {
                        return Err(syntax(line, col, "exponent digits", found_at(&chars, i)));
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(tl, tc, "number", format!("`{text}`")))?;
                if !value.is_finite() {
                    return Err(syntax(tl, tc, "finite number", format!("`{text}`")));
                }
                out.push(Token { tok: Tok::Num(value), line: tl, column: tc });
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                    col += 1;
                }
                out.push(Token { tok: Tok::Word(chars[start..i].iter().collect()), line: tl, column: tc });
            }
            other => {
                return Err(syntax(tl, tc, "token", format!("`{other}`")));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

fn found_at(chars: &[char], i: usize) -> String {
    chars.get(i).map_or("end of input".to_string(), |c| format!("`{c}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_positions() {
        let toks = tokenize("canvas [1, -2.5e-3, .5]\n  part").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Word("canvas".into()),
                Tok::LBracket,
                Tok::Num(1.0),
                Tok::Comma,
                Tok::Num(-2.5e-3),
                Tok::Comma,
                Tok::Num(0.5),
                Tok::RBracket,
                Tok::Word("part".into()),
                Tok::Eof
            ]
        );
        assert_eq!((toks[8].line, toks[8].column), (2, 3));
    }

    #[test]
    fn comments_are_skipped() {
        let toks = tokenize("# hello [\nsphere # tail").unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].line, 2);
    }

    #[test]
    fn bad_inputs_are_positioned() {
        assert!(matches!(tokenize("\"abc"), Err(ParseError::Syntax { line: 1, column: 1, .. })));
        assert!(matches!(tokenize("x\n  @"), Err(ParseError::Syntax { line: 2, column: 3, .. })));
        assert!(matches!(tokenize("1e999"), Err(ParseError::Syntax { .. })));
        assert!(matches!(tokenize("-"), Err(ParseError::Syntax { .. })));
        assert!(matches!(tokenize("1e"), Err(ParseError::Syntax { .. })));
    }
}
