use std::collections::HashSet;

use serde_json::{Map, Value};

use super::inspector::normalize_label;
use super::{ask, extract_err, AgentError, Arrangement, ArrangementEntry, Canvas, Note, PartCount, PartDecomposition, Query, Template};
use crate::math::Vec3;
use crate::mllm::{extract_json, extract_list, extract_numeric_list, parse_python_literal, Client, RequestTag};

/// Canvas components at or above this many meters are treated as hallucinated.
pub const MAX_CANVAS_DIM: f64 = 1000.0;

pub(crate) fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

pub(crate) fn fmt_vec(v: &Vec3) -> String {
    format!("[{}, {}, {}]", fmt_num(v.x), fmt_num(v.y), fmt_num(v.z))
}

pub fn metricize(q: &Query, client: &Client) -> Result<Canvas, AgentError> {
    let prompt = Template::Metricizer.fill(&[("q", q.as_str())])?;
    let request = client.request(prompt, RequestTag::new("metricizer", q.as_str(), 0));
    ask(client, &request, parse_canvas)
}

fn parse_canvas(text: &str) -> Result<Canvas, AgentError> {
    let values = extract_numeric_list(text).map_err(|e| extract_err("metricizer", e))?;
    if values.len() != 3 {
        return Err(AgentError::malformed("metricizer", format!("expected 3 dimensions, got {}", values.len())));
    }
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0 && *v < MAX_CANVAS_DIM)) {
        return Err(AgentError::ImplausibleDims { values });
    }
    Ok(Canvas { dims: Vec3::new(values[0], values[1], values[2]) })
}

pub fn decompose(q: &Query, client: &Client, max_parts: usize) -> Result<PartDecomposition, AgentError> {
    if max_parts == 0 {
        return Err(AgentError::InvalidInput("max_parts must be at least 1".into()));
    }
    let n = max_parts.to_string();
    let prompt = Template::Decomposer.fill(&[("q", q.as_str()), ("n_parts", &n)])?;
    let request = client.request(prompt, RequestTag::new("decomposer", q.as_str(), 0));
    ask(client, &request, |text| parse_decomposition(text, max_parts))
}

fn parse_decomposition(text: &str, max_parts: usize) -> Result<PartDecomposition, AgentError> {
    let labels = extract_list(text).map_err(|e| extract_err("decomposer", e))?;
    let counts = extract_numeric_list(text).map_err(|e| extract_err("decomposer", e))?;
    if labels.len() != counts.len() {
        return Err(AgentError::LengthMismatch { parts: labels.len(), counts: counts.len() });
    }
    if labels.is_empty() {
        return Err(AgentError::malformed("decomposer", "empty part list"));
    }
    if labels.len() > max_parts {
        return Err(AgentError::malformed(
            "decomposer",
            format!("{} parts exceed the limit of {max_parts}: {:?}", labels.len(), &labels[max_parts..]),
        ));
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(labels.len());
    for (label, count) in labels.into_iter().zip(counts) {
        let label = label.trim().to_string();
        if label.is_empty() || !seen.insert(label.clone()) {
            return Err(AgentError::malformed("decomposer", format!("empty or duplicate part label {label:?}")));
        }
        if !(count >= 1.0 && count.fract() == 0.0 && count <= u32::MAX as f64) {
            return Err(AgentError::malformed("decomposer", format!("count {count} for {label:?} is not a positive integer")));
        }
        entries.push(PartCount { label, count: count as u32 });
    }
    Ok(PartDecomposition { entries })
}

/// Layout JSON in the same shape the arrangement prompt asks for.
pub fn arrangement_json(a: &Arrangement) -> String {
    let mut root = Map::new();
    for e in &a.entries {
        let mut m = Map::new();
        m.insert("height".into(), e.dims.z.into());
        m.insert("width".into(), e.dims.y.into());
        m.insert("length".into(), e.dims.x.into());
        m.insert("location".into(), e.position.iter().copied().collect::<Vec<f64>>().into());
        m.insert("rotation".into(), e.rotation.iter().copied().collect::<Vec<f64>>().into());
        root.insert(e.label.clone(), Value::Object(m));
    }
    serde_json::to_string_pretty(&Value::Object(root)).unwrap_or_default()
}

pub fn propose_arrangement(
    q: &Query,
    d: &PartDecomposition,
    c: &Canvas,
    client: &Client,
    strict: bool,
    notes: &mut Vec<Note>,
) -> Result<Arrangement, AgentError> {
    if d.entries.is_empty() {
        return Err(AgentError::InvalidInput("empty part decomposition".into()));
    }
    let labels = serde_json::to_string(&d.labels()).unwrap_or_default().replace("\",\"", "\", \"");
    let counts = d.counts().iter().map(u32::to_string).collect::<Vec<_>>().join(", ");
    let d_text = format!("Common Parts: {labels}\nPart Counts: [{counts}]");
    let prompt = Template::Arrangement.fill(&[("q", q.as_str()), ("C", &fmt_vec(&c.dims)), ("D", &d_text)])?;
    let request = client.request(prompt, RequestTag::new("arrangement", q.as_str(), 0));
    let mut local = Vec::new();
    let a = ask(client, &request, |text| {
        local.clear();
        parse_arrangement(text, d, c, strict, &mut local)
    })?;
    notes.extend(local);
    Ok(a)
}

fn parse_arrangement(
    text: &str,
    d: &PartDecomposition,
    c: &Canvas,
    strict: bool,
    notes: &mut Vec<Note>,
) -> Result<Arrangement, AgentError> {
    let value = extract_json(text).map_err(|e| extract_err("arrangement", e))?;
    let Value::Object(root) = value else {
        return Err(AgentError::malformed("arrangement", "layout is not a JSON object"));
    };
    if root.is_empty() {
        return Err(AgentError::malformed("arrangement", "layout has no parts"));
    }
    let mut entries = Vec::with_capacity(root.len());
    for (label, body) in &root {
        let Value::Object(fields) = body else {
            return Err(AgentError::malformed("arrangement", format!("entry {label:?} is not an object")));
        };
        entries.push(parse_entry(label, fields)?);
    }

    for pc in &d.entries {
        let want = normalize_label(&pc.label);
        let found = entries.iter().filter(|e| normalize_label(&e.label) == want).count() as u32;
        if found != pc.count {
            let err = AgentError::CountMismatch { label: pc.label.clone(), expected: pc.count, found };
            if strict {
                return Err(err);
            }
            notes.push(Note::new("arrangement", err.to_string()));
        }
    }
    for e in &entries {
        if (0..3).any(|i| e.dims[i] > 1.5 * c.dims[i]) {
            notes.push(Note::new(
                "arrangement",
                format!("entry {:?} with dims {} exceeds 1.5x the canvas {}", e.label, fmt_vec(&e.dims), fmt_vec(&c.dims)),
            ));
        }
    }
    Ok(Arrangement { entries, canvas: Some(c.dims) })
}

fn field<'a>(fields: &'a Map<String, Value>, names: &[&str]) -> Option<&'a Value> {
    fields.iter().find(|(k, _)| names.iter().any(|n| k.trim().eq_ignore_ascii_case(n))).map(|(_, v)| v)
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => parse_python_literal(s).ok().and_then(|v| v.as_f64()),
        _ => None,
    }
}

fn vec3(v: &Value) -> Option<Vec3> {
    let items = v.as_array()?;
    if items.len() != 3 {
        return None;
    }
    Some(Vec3::new(number(&items[0])?, number(&items[1])?, number(&items[2])?))
}

fn parse_entry(label: &str, fields: &Map<String, Value>) -> Result<ArrangementEntry, AgentError> {
    let missing = |f: &str| AgentError::MissingField { part: label.to_string(), field: f.to_string() };
    let bad = |f: &str| AgentError::malformed("arrangement", format!("entry {label:?} has an invalid {f}"));
    let dims = match field(fields, &["dims", "dimensions", "size"]) {
        Some(v) => vec3(v).ok_or_else(|| bad("dimensions"))?,
        None => {
            let mut out = Vec3::zeros();
            for (i, name) in ["length", "width", "height"].iter().enumerate() {
                out[i] = number(field(fields, &[name]).ok_or_else(|| missing(name))?).ok_or_else(|| bad(name))?;
            }
            out
        }
    };
    let position = vec3(field(fields, &["location", "position", "center"]).ok_or_else(|| missing("location"))?)
        .ok_or_else(|| bad("location"))?;
    let rotation = vec3(field(fields, &["rotation", "rot"]).ok_or_else(|| missing("rotation"))?)
        .ok_or_else(|| bad("rotation"))?;
    Ok(ArrangementEntry { label: label.trim().to_string(), dims, position, rotation })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mllm::{FixtureEntry, MockBackend};

    fn client(entries: Vec<FixtureEntry>) -> Client {
        Client::new(Arc::new(MockBackend::new(entries)))
    }

    fn chair() -> Query {
        Query::new("Chair").unwrap()
    }

    #[test]
    fn canvas_from_fixture() {
        let c = client(vec![FixtureEntry::new("metricizer", "Chair", 0, "dimensions = [0.45, 0.45, 1.0] # C")]);
        assert_eq!(metricize(&chair(), &c).unwrap().dims, Vec3::new(0.45, 0.45, 1.0));
        let two = client(vec![FixtureEntry::new("metricizer", "Chair", 0, "dimensions = [0.45, 1.0]")]);
        assert!(matches!(metricize(&chair(), &two), Err(AgentError::MalformedResponse { .. })));
        let neg = client(vec![FixtureEntry::new("metricizer", "Chair", 0, "[0.6, -1, 1]")]);
        assert!(matches!(metricize(&chair(), &neg), Err(AgentError::ImplausibleDims { .. })));
        assert_eq!(neg.transcript.len(), 3);
    }

    #[test]
    fn decomposition_rules() {
        let ok = "part_list = ['backrest', 'seat', 'legs']\npart_counts = [1, 1, 4]";
        let d = decompose(&chair(), &client(vec![FixtureEntry::new("decomposer", "Chair", 0, ok)]), 8).unwrap();
        assert_eq!(d.labels(), vec!["backrest", "seat", "legs"]);
        assert_eq!(d.counts(), vec![1, 1, 4]);
        let short = "part_list = ['a', 'b', 'c']\npart_counts = [1, 1]";
        let r = decompose(&chair(), &client(vec![FixtureEntry::new("decomposer", "Chair", 0, short)]), 8);
        assert_eq!(r, Err(AgentError::LengthMismatch { parts: 3, counts: 2 }));
        let many = format!(
            "part_list = [{}]\npart_counts = [{}]",
            (0..9).map(|i| format!("'p{i}'")).collect::<Vec<_>>().join(", "),
            vec!["1"; 9].join(", ")
        );
        let r = decompose(&chair(), &client(vec![FixtureEntry::new("decomposer", "Chair", 0, &many)]), 8);
        assert!(matches!(r, Err(AgentError::MalformedResponse { detail, .. }) if detail.contains("p8")));
    }

    fn legs_json(n: usize) -> String {
        let mut parts: Vec<String> = (1..=n)
            .map(|i| format!("\"Leg{i}\": {{\"height\": 0.45, \"width\": 0.065, \"length\": 0.065, \"location\": [0.04, {}, 0.23], \"rotation\": [0, 0, 0]}}", 0.1 * i as f64))
            .collect();
        parts.push("\"Seat\": {\"height\": 0.1, \"width\": 0.6, \"length\": 0.6, \"location\": [0.3, 0.3, 0.5], \"rotation\": [0, 0, 0]}".into());
        format!("Reasoning...\n```json\n{{{}}}\n```", parts.join(",\n"))
    }

    fn legs_seat() -> PartDecomposition {
        PartDecomposition {
            entries: vec![PartCount { label: "legs".into(), count: 4 }, PartCount { label: "seat".into(), count: 1 }],
        }
    }

    #[test]
    fn count_mismatch_strict_and_lenient() {
        let canvas = Canvas { dims: Vec3::new(0.6, 0.6, 1.0) };
        let c = client(vec![FixtureEntry::new("arrangement", "Chair", 0, &legs_json(3))]);
        let mut notes = Vec::new();
        let r = propose_arrangement(&chair(), &legs_seat(), &canvas, &c, true, &mut notes);
        assert_eq!(r, Err(AgentError::CountMismatch { label: "legs".into(), expected: 4, found: 3 }));
        let a = propose_arrangement(&chair(), &legs_seat(), &canvas, &c, false, &mut notes).unwrap();
        assert_eq!(a.entries.len(), 4);
        assert_eq!(notes.len(), 1);
        let c4 = client(vec![FixtureEntry::new("arrangement", "Chair", 0, &legs_json(4))]);
        let mut notes = Vec::new();
        let a = propose_arrangement(&chair(), &legs_seat(), &canvas, &c4, true, &mut notes).unwrap();
        assert_eq!(a.entries.len(), 5);
        assert_eq!(a.canvas, Some(canvas.dims));
        assert!(notes.is_empty());
    }

    #[test]
    fn missing_rotation_is_named() {
        let text = "{\"Seat\": {\"height\": 0.1, \"width\": 0.6, \"length\": 0.6, \"location\": [0.3, 0.3, 0.5]}}";
        let c = client(vec![FixtureEntry::new("arrangement", "Chair", 0, text)]);
        let d = PartDecomposition { entries: vec![PartCount { label: "seat".into(), count: 1 }] };
        let canvas = Canvas { dims: Vec3::new(0.6, 0.6, 1.0) };
        let r = propose_arrangement(&chair(), &d, &canvas, &c, false, &mut Vec::new());
        assert_eq!(r, Err(AgentError::MissingField { part: "Seat".into(), field: "rotation".into() }));
    }

    #[test]
    fn pi_strings_and_json_shape() {
        let text = "{'Lid': {'height': 0.1, 'width': 0.2, 'length': 0.2, 'location': [0, 0, 1], 'rotation': ['pi/2', 0, 0]}}";
        let d = PartDecomposition { entries: vec![PartCount { label: "lid".into(), count: 1 }] };
        let canvas = Canvas { dims: Vec3::new(0.5, 0.5, 1.0) };
        let c = client(vec![FixtureEntry::new("arrangement", "Pot", 0, text)]);
        let a = propose_arrangement(&Query::new("Pot").unwrap(), &d, &canvas, &c, true, &mut Vec::new()).unwrap();
        assert_eq!(a.entries[0].rotation.x, std::f64::consts::FRAC_PI_2);
        let json: Value = serde_json::from_str(&arrangement_json(&a)).unwrap();
        assert_eq!(json["Lid"]["length"], 0.2);
        assert_eq!(json["Lid"]["height"], 0.1);
    }
}
