use serde_json::{Map, Value};

use super::pipeline::MatchRule;
use super::{ask, extract_err, AgentError, Edit, EditSet, Note, Query, Template};
use crate::mllm::{extract_list, extract_structured_list, Client, ImageAttachment, RequestTag};
use crate::render::{encode_png, RenderSet};

/// Upper bound on edits taken from one recommendation.
pub const MAX_EDITS: usize = 5;

/// Lowercase, trimmed, with every run of non-alphanumerics collapsed to one space.
pub fn normalize_prediction(s: &str) -> String {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Part-label key used to group instances: `"Leg3"`, `"legs"` and `"LEG"` all give `"leg"`.
pub fn normalize_label(s: &str) -> String {
    let base: String = s.to_lowercase().chars().filter(|c| c.is_alphabetic()).collect();
    match base.strip_suffix('s') {
        Some(stem) if !stem.is_empty() && !stem.ends_with('s') => stem.to_string(),
        _ => base,
    }
}

pub fn prediction_matches(q: &Query, predictions: &[String], rule: MatchRule) -> bool {
    let want = normalize_prediction(q.as_str());
    let mut candidates = predictions.iter();
    match rule {
        MatchRule::Top1 => candidates.next().is_some_and(|p| normalize_prediction(p) == want),
        MatchRule::Any => candidates.any(|p| normalize_prediction(p) == want),
    }
}

fn shaded_images(renders: &RenderSet) -> Result<Vec<ImageAttachment>, AgentError> {
    let images = renders
        .shaded()
        .take(crate::mllm::MAX_IMAGES)
        .map(|v| encode_png(&v.image).map(|bytes| ImageAttachment::png(&bytes)))
        .collect::<Result<Vec<_>, _>>()?;
    if images.is_empty() {
        return Err(AgentError::InvalidInput("render set has no shaded view".into()));
    }
    Ok(images)
}

/// Asks for up to `top_p` guesses of what the shaded views show, all views in one request.
pub fn identify(
    q: &Query,
    renders: &RenderSet,
    iteration: u32,
    top_p: usize,
    client: &Client,
) -> Result<Vec<String>, AgentError> {
    let images = shaded_images(renders)?;
    let (s, p) = (images.len().to_string(), top_p.to_string());
    let prompt = Template::Identifier.fill(&[("s", &s), ("p", &p)])?;
    let request = client.request(prompt, RequestTag::new("identifier", q.as_str(), iteration)).with_images(images);
    ask(client, &request, |text| {
        let mut list = extract_list(text).map_err(|e| extract_err("identifier", e))?;
        list.retain(|s| !s.trim().is_empty());
        if list.is_empty() {
            return Err(AgentError::malformed("identifier", "empty prediction list"));
        }
        list.truncate(top_p);
        Ok(list.into_iter().map(|s| s.trim().to_string()).collect())
    })
}

fn text_field(item: &Map<String, Value>, names: &[&str]) -> Option<String> {
    item.iter()
        .find(|(k, _)| names.iter().any(|n| k.trim().eq_ignore_ascii_case(n)))
        .and_then(|(_, v)| match v {
            Value::String(s) => Some(s.trim().to_string()),
            Value::Array(a) => {
                let parts: Vec<_> = a.iter().filter_map(Value::as_str).collect();
                (!parts.is_empty()).then(|| parts.join(", "))
            }
            _ => None,
        })
        .filter(|s| !s.is_empty())
}

fn parse_edits(text: &str, notes: &mut Vec<Note>) -> Result<EditSet, AgentError> {
    let items = extract_structured_list(text).map_err(|e| extract_err("edit_recommender", e))?;
    let mut edits = Vec::new();
    for (i, item) in items.iter().enumerate().take(MAX_EDITS) {
        let get = |names: &[&str], field: &str| {
            text_field(item, names)
                .ok_or_else(|| AgentError::malformed("edit_recommender", format!("item {i} lacks {field}")))
        };
        let edit = Edit {
            aspect: get(&["visual_aspect", "aspect", "v", "part", "feature"], "visual_aspect")?,
            edit_type: get(&["edit_type", "type", "tau"], "edit_type")?,
            command: get(&["command", "instruction", "w"], "command")?,
        };
        if !edit.has_known_type() {
            notes.push(Note::new("edit_recommender", format!("unknown edit type {:?} accepted", edit.edit_type)));
        }
        edits.push(edit);
    }
    if items.len() > MAX_EDITS {
        notes.push(Note::new("edit_recommender", format!("{} edits truncated to {MAX_EDITS}", items.len())));
    }
    Ok(EditSet { edits })
}

/// Asks why the views were mistaken for `q_hat` and how to fix the program.
pub fn recommend_edits(
    q: &Query,
    renders: &RenderSet,
    q_hat: &[String],
    iteration: u32,
    client: &Client,
    notes: &mut Vec<Note>,
) -> Result<EditSet, AgentError> {
    let images = shaded_images(renders)?;
    let q_hat_text = if q_hat.is_empty() {
        "[]".to_string()
    } else {
        format!("[{}]", q_hat.iter().map(|s| format!("'{s}'")).collect::<Vec<_>>().join(", "))
    };
    let prompt = Template::EditRecommender.fill(&[("q", q.as_str()), ("q_hat", &q_hat_text)])?;
    let request =
        client.request(prompt, RequestTag::new("edit_recommender", q.as_str(), iteration)).with_images(images);
    let mut local = Vec::new();
    let edits = ask(client, &request, |text| {
        local.clear();
        parse_edits(text, &mut local)
    })?;
    notes.extend(local);
    Ok(edits)
}
