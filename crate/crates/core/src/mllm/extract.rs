//! Lenient extraction of structured values from free-form model responses.
//!
//! Models wrap their answers in prose, code fences and Python-flavoured
//! literals. The extractors here scan for the first candidate of the wanted
//! shape and report a typed error when none parses.

use serde_json::{Map, Number, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("no bracketed list found")]
    NoListFound,
    #[error("unterminated string starting at byte {offset}")]
    UnterminatedString { offset: usize },
    #[error("list item {item:?} is not numeric")]
    NotNumeric { item: String },
    #[error("no JSON object found")]
    NoJsonFound,
    #[error("malformed JSON object: {0}")]
    JsonSyntax(String),
    #[error("malformed literal at byte {offset}: {message}")]
    Literal { offset: usize, message: String },
}

/// First bracketed list whose items are all quoted strings.
pub fn extract_list(response: &str) -> Result<Vec<String>, ExtractError> {
    for start in candidates(response, '[') {
        match Literal::new(response, start).value() {
            Ok(Value::Array(items)) if items.iter().all(Value::is_string) => {
                return Ok(items.into_iter().map(|v| v.as_str().unwrap_or_default().to_string()).collect());
            }
            Err(e @ ExtractError::UnterminatedString { .. }) => return Err(e),
            _ => {}
        }
    }
    Err(ExtractError::NoListFound)
}

/// First bracketed list of numbers. Text after `#` on each line is ignored,
/// lists of strings are skipped, and `pi` expressions such as `-pi/2` are evaluated.
pub fn extract_numeric_list(response: &str) -> Result<Vec<f64>, ExtractError> {
    let text: String = response.lines().map(strip_comment).collect::<Vec<_>>().join("\n");
    for start in candidates(&text, '[') {
        match Literal::new(&text, start).value() {
            Ok(Value::Array(items)) if items.iter().all(Value::is_number) => {
                return Ok(items.iter().filter_map(Value::as_f64).collect());
            }
            Ok(Value::Array(items)) if items.iter().any(Value::is_number) && !items.iter().any(is_container) => {
                let bad = items.iter().find(|v| !v.is_number()).map(|v| v.to_string()).unwrap_or_default();
                return Err(ExtractError::NotNumeric { item: bad });
            }
            Ok(_) => {}
            Err(_) => {
                let body = bracket_body(&text, start);
                if body.chars().any(|c| c.is_ascii_digit()) && !body.contains(['[', '{', '\'', '"']) {
                    let item = body
                        .split(',')
                        .map(str::trim)
                        .find(|s| Literal::new(s, 0).whole().map(|v| !v.is_number()).unwrap_or(true))
                        .unwrap_or(body)
                        .to_string();
                    return Err(ExtractError::NotNumeric { item });
                }
            }
        }
    }
    Err(ExtractError::NoListFound)
}

/// First `{...}` object in the response. Strict JSON is tried first, then
/// Python dict syntax (single quotes, trailing commas, `True`/`None`).
pub fn extract_json(response: &str) -> Result<Value, ExtractError> {
    let mut first_err = None;
    for start in candidates(response, '{') {
        let Some(end) = matching_close(response, start) else {
            first_err.get_or_insert_with(|| format!("unclosed brace at byte {start}"));
            continue;
        };
        let slice = &response[start..end];
        match serde_json::from_str::<Value>(slice) {
            Ok(v @ Value::Object(_)) => return Ok(v),
            Ok(_) => {}
            Err(e) => match Literal::new(slice, 0).whole() {
                Ok(v @ Value::Object(_)) => return Ok(v),
                _ => {
                    first_err.get_or_insert_with(|| e.to_string());
                }
            },
        }
    }
    Err(first_err.map(ExtractError::JsonSyntax).unwrap_or(ExtractError::NoJsonFound))
}

/// First bracketed list whose items are all dictionaries.
pub fn extract_structured_list(response: &str) -> Result<Vec<Map<String, Value>>, ExtractError> {
    for start in candidates(response, '[') {
        if let Ok(Value::Array(items)) = Literal::new(response, start).value() {
            if items.iter().all(Value::is_object) && (!items.is_empty() || is_bare_empty(response, start)) {
                return Ok(items
                    .into_iter()
                    .filter_map(|v| match v {
                        Value::Object(m) => Some(m),
                        _ => None,
                    })
                    .collect());
            }
        }
    }
    Err(ExtractError::NoListFound)
}

/// Contents of the first fenced block, or of the first one whose info string
/// starts with `language_tag`. Without any fence the response is returned as is.
pub fn extract_code_block(response: &str, language_tag: Option<&str>) -> String {
    let blocks = fenced_blocks(response);
    if blocks.is_empty() {
        return response.to_string();
    }
    if let Some(tag) = language_tag {
        if let Some((_, body)) = blocks.iter().find(|(info, _)| {
            info.split_whitespace().next().is_some_and(|w| w.eq_ignore_ascii_case(tag))
        }) {
            return body.clone();
        }
    }
    blocks[0].1.clone()
}

/// Parses one Python or JSON literal occupying the whole input (surrounding
/// whitespace allowed). Tuples become arrays.
pub fn parse_python_literal(text: &str) -> Result<Value, ExtractError> {
    Literal::new(text, 0).whole()
}

fn is_container(v: &Value) -> bool {
    v.is_array() || v.is_object()
}

fn is_bare_empty(text: &str, start: usize) -> bool {
    text[start + 1..].trim_start().starts_with(']')
}

fn candidates(text: &str, open: char) -> impl Iterator<Item = usize> + '_ {
    text.char_indices().filter(move |&(_, c)| c == open).map(|(i, _)| i)
}

fn strip_comment(line: &str) -> &str {
    let mut quote = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '\'' | '"') => quote = Some(c),
            (Some(q), _) if c == q => quote = None,
            (None, '#') => return &line[..i],
            _ => {}
        }
    }
    line
}

fn bracket_body(text: &str, start: usize) -> &str {
    let rest = &text[start + 1..];
    rest.find(']').map(|e| &rest[..e]).unwrap_or(rest)
}

/// Byte offset just past the brace closing the one at `start`, skipping quoted text.
fn matching_close(text: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' => quote = Some('"'),
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn fenced_blocks(text: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let Some(after) = line.trim_start().strip_prefix("```") else { continue };
        if let Some(end) = after.find("```") {
            out.push((String::new(), after[..end].to_string()));
            continue;
        }
        let info = after.trim().to_string();
        let mut body = Vec::new();
        for inner in lines.by_ref() {
            if inner.trim_start().starts_with("```") {
                break;
            }
            body.push(inner);
        }
        let mut joined = body.join("\n");
        if !body.is_empty() {
            joined.push('\n');
        }
        out.push((info, joined));
    }
    out
}

/// Recursive-descent reader for Python/JSON literals.
struct Literal<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Literal<'a> {
    fn new(src: &'a str, pos: usize) -> Self {
        Literal { src, pos }
    }

    fn whole(mut self) -> Result<Value, ExtractError> {
        let v = self.value()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return Err(self.fail("trailing characters"));
        }
        Ok(v)
    }

    fn fail(&self, message: &str) -> ExtractError {
        ExtractError::Literal { offset: self.pos, message: message.into() }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn value(&mut self) -> Result<Value, ExtractError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.fail("unexpected end of input")),
            Some('[') => {
                self.bump();
                Ok(Value::Array(self.sequence(']')?))
            }
            Some('(') => {
                self.bump();
                Ok(Value::Array(self.sequence(')')?))
            }
            Some('{') => {
                self.bump();
                self.dict()
            }
            Some(c) if opening_quote(c).is_some() => self.string().map(Value::String),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let save = self.pos;
                let word = self.word();
                match word.as_str() {
                    "True" | "true" => Ok(Value::Bool(true)),
                    "False" | "false" => Ok(Value::Bool(false)),
                    "None" | "null" => Ok(Value::Null),
                    _ => {
                        self.pos = save;
                        self.number()
                    }
                }
            }
            Some(_) => self.number(),
        }
    }

    fn sequence(&mut self, close: char) -> Result<Vec<Value>, ExtractError> {
        let mut items = Vec::new();
        loop {
            if self.eat(close) {
                return Ok(items);
            }
            items.push(self.value()?);
            if self.eat(',') {
                continue;
            }
            if self.eat(close) {
                return Ok(items);
            }
            return Err(self.fail("expected `,` or closing bracket"));
        }
    }

    fn dict(&mut self) -> Result<Value, ExtractError> {
        let mut map = Map::new();
        loop {
            if self.eat('}') {
                return Ok(Value::Object(map));
            }
            self.skip_ws();
            let key = match self.peek() {
                Some(c) if opening_quote(c).is_some() => self.string()?,
                Some(c) if c.is_ascii_alphabetic() || c == '_' => self.word(),
                _ => match self.value()? {
                    Value::Number(n) => n.to_string(),
                    _ => return Err(self.fail("unsupported dictionary key")),
                },
            };
            if !self.eat(':') {
                return Err(self.fail("expected `:`"));
            }
            let v = self.value()?;
            map.insert(key, v);
            if self.eat(',') {
                continue;
            }
            if self.eat('}') {
                return Ok(Value::Object(map));
            }
            return Err(self.fail("expected `,` or `}`"));
        }
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    fn string(&mut self) -> Result<String, ExtractError> {
        let start = self.pos;
        let open = self.bump().unwrap_or('"');
        let closers = opening_quote(open).unwrap_or(&[]);
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(ExtractError::UnterminatedString { offset: start });
            };
            if c == '\n' {
                return Err(ExtractError::UnterminatedString { offset: start });
            }
            if closers.contains(&c) {
                return Ok(out);
            }
            if c == '\\' {
                match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some(other) => out.push(other),
                    None => return Err(ExtractError::UnterminatedString { offset: start }),
                }
            } else {
                out.push(c);
            }
        }
    }

    fn number(&mut self) -> Result<Value, ExtractError> {
        let (v, is_int) = self.sum()?;
        if !v.is_finite() {
            return Err(self.fail("non-finite number"));
        }
        if is_int && v.abs() < 9.0e15 {
            return Ok(Value::Number(Number::from(v as i64)));
        }
        Number::from_f64(v).map(Value::Number).ok_or_else(|| self.fail("non-finite number"))
    }

    fn sum(&mut self) -> Result<(f64, bool), ExtractError> {
        let (mut acc, mut int) = self.product()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some('+') => {
                    self.bump();
                    let (r, ri) = self.product()?;
                    acc += r;
                    int &= ri;
                }
                Some('-') => {
                    self.bump();
                    let (r, ri) = self.product()?;
                    acc -= r;
                    int &= ri;
                }
                _ => return Ok((acc, int)),
            }
        }
    }

    fn product(&mut self) -> Result<(f64, bool), ExtractError> {
        let (mut acc, mut int) = self.unary()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some('*') => {
                    self.bump();
                    let (r, ri) = self.unary()?;
                    acc *= r;
                    int &= ri;
                }
                Some('/') => {
                    self.bump();
                    let (r, _) = self.unary()?;
                    acc /= r;
                    int = false;
                }
                _ => return Ok((acc, int)),
            }
        }
    }

    fn unary(&mut self) -> Result<(f64, bool), ExtractError> {
        self.skip_ws();
        match self.peek() {
            Some('-') => {
                self.bump();
                let (v, i) = self.unary()?;
                Ok((-v, i))
            }
            Some('+') => {
                self.bump();
                self.unary()
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let word = self.word();
                match word.as_str() {
                    "pi" | "math.pi" | "np.pi" | "numpy.pi" | "PI" => Ok((std::f64::consts::PI, false)),
                    _ => Err(self.fail(&format!("unknown name `{word}`"))),
                }
            }
            _ => self.numeral(),
        }
    }

    fn numeral(&mut self) -> Result<(f64, bool), ExtractError> {
        let start = self.pos;
        let mut int = true;
        while let Some(c) = self.peek() {
            let prev = self.src[start..self.pos].chars().last();
            if c.is_ascii_digit() || c == '_' {
                self.bump();
            } else if c == '.' || c == 'e' || c == 'E' {
                int = false;
                self.bump();
            } else if (c == '-' || c == '+') && matches!(prev, Some('e' | 'E')) {
                self.bump();
            } else {
                break;
            }
        }
        let text: String = self.src[start..self.pos].chars().filter(|&c| c != '_').collect();
        if text.is_empty() {
            return Err(self.fail("expected a value"));
        }
        text.parse::<f64>().map(|v| (v, int)).map_err(|_| ExtractError::Literal {
            offset: start,
            message: format!("invalid number `{text}`"),
        })
    }
}

fn opening_quote(c: char) -> Option<&'static [char]> {
    match c {
        '\'' => Some(&['\'']),
        '"' => Some(&['"']),
        '`' => Some(&['\'', '`']),
        '\u{2018}' => Some(&['\u{2019}', '\'']),
        '\u{201c}' => Some(&['\u{201d}', '"']),
        _ => None,
    }
}
