use serde::{Deserialize, Serialize};
use serde_json::json;

use super::designer::arrangement_json;
use super::pipeline::ProposalMode;
use super::{ask, AgentError, Arrangement, EditSet, Note, Query, Template, PROTOSCENE_REFERENCE};
use crate::mllm::{extract_code_block, Client, RequestTag};
use crate::scene::{arrangement_to_program, parse_program, serialize_program, validate, SceneProgram};

/// Result of one refinement round. When every reply was unusable the
/// previous program is returned unchanged and `fell_back` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub program: SceneProgram,
    pub fell_back: bool,
    pub note: Option<Note>,
}

fn parse_reply(module: &str, text: &str) -> Result<SceneProgram, AgentError> {
    let code = extract_code_block(text, Some("protoscene"));
    let program = parse_program(&code).map_err(|e| AgentError::malformed(module, e))?;
    if let Some(d) = validate(&program).first() {
        return Err(AgentError::malformed(module, d));
    }
    Ok(program)
}

pub fn proposal_to_code(
    q: &Query,
    a: &Arrangement,
    mode: ProposalMode,
    client: &Client,
) -> Result<SceneProgram, AgentError> {
    match mode {
        ProposalMode::Deterministic => Ok(arrangement_to_program(a)?),
        ProposalMode::Mllm => {
            let layout = format!("```json\n{}\n```", arrangement_json(a));
            let prompt =
                Template::Proposal2Code.fill(&[("q", q.as_str()), ("L", PROTOSCENE_REFERENCE.trim_end()), ("A", &layout)])?;
            let request = client.request(prompt, RequestTag::new("proposal2code", q.as_str(), 0));
            let mut program = ask(client, &request, |t| parse_reply("proposal2code", t))?;
            program.canvas = program.canvas.or(a.canvas);
            Ok(program)
        }
    }
}

/// Edit list as shown to the refiner.
pub(crate) fn edits_text(edits: &EditSet) -> String {
    let items: Vec<_> = edits
        .edits
        .iter()
        .map(|e| json!({"visual_aspect": e.aspect, "edit_type": e.edit_type, "command": e.command}))
        .collect();
    serde_json::to_string_pretty(&items).unwrap_or_default()
}

/// The refiner prompt; the edit section is left out when `edits` is `None`.
pub(crate) fn refine_prompt(q: &Query, p_prev: &SceneProgram, edits: Option<&EditSet>) -> Result<String, AgentError> {
    let section = match edits {
        Some(e) => Template::RefinerEdits.fill(&[("E", &edits_text(e))])?,
        None => String::new(),
    };
    let code = serialize_program(p_prev);
    Ok(Template::Refiner.fill(&[
        ("q", q.as_str()),
        ("L", PROTOSCENE_REFERENCE.trim_end()),
        ("P_prev", code.trim_end()),
        ("E", &section),
    ])?)
}

pub fn refine_code(
    q: &Query,
    p_prev: &SceneProgram,
    edits: Option<&EditSet>,
    iteration: u32,
    client: &Client,
) -> Result<RefineOutcome, AgentError> {
    let prompt = refine_prompt(q, p_prev, edits)?;
    let request = client.request(prompt, RequestTag::new("refiner", q.as_str(), iteration));
    match ask(client, &request, |t| parse_reply("refiner", t)) {
        Ok(mut program) => {
            program.canvas = program.canvas.or(p_prev.canvas);
            Ok(RefineOutcome { program, fell_back: false, note: None })
        }
        Err(AgentError::Template(e)) => Err(e.into()),
        Err(e) => {
            let note = Note::new("refiner", format!("iteration {iteration}: keeping previous program: {e}"));
            log::warn!("{}", note.message);
            Ok(RefineOutcome { program: p_prev.clone(), fell_back: true, note: Some(note) })
        }
    }
}

/// Single-prompt baseline without designer or inspector.
pub fn run_naive(q: &Query, client: &Client) -> Result<SceneProgram, AgentError> {
    let prompt = Template::Naive.fill(&[("q", q.as_str()), ("L", PROTOSCENE_REFERENCE)])?;
    let request = client.request(prompt, RequestTag::new("naive", q.as_str(), 0));
    ask(client, &request, |t| parse_reply("naive", t))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::agents::{ArrangementEntry, Edit};
    use crate::math::Vec3;
    use crate::mllm::{FixtureEntry, MockBackend};
    use crate::scene::Primitive;

    const TABLE: &str = "part \"Top\" { cuboid dims [1, 0.6, 0.05] pos [0, 0, 0.7] rot [0, 0, 0] }\npart \"Leg1\" { cuboid dims [0.05, 0.05, 0.7] pos [0.45, 0.25, 0.35] rot [0, 0, 0] }";

    fn client(entries: Vec<FixtureEntry>) -> Client {
        Client::new(Arc::new(MockBackend::new(entries)))
    }

    fn q() -> Query {
        Query::new("Table").unwrap()
    }

    #[test]
    fn deterministic_proposal_keeps_poses() {
        let a = Arrangement {
            entries: vec![ArrangementEntry {
                label: "Top".into(),
                dims: Vec3::new(1.0, 0.6, 0.05),
                position: Vec3::new(0.0, 0.0, 0.7),
                rotation: Vec3::zeros(),
            }],
            canvas: Some(Vec3::new(1.0, 0.6, 0.75)),
        };
        let p = proposal_to_code(&q(), &a, ProposalMode::Deterministic, &client(vec![])).unwrap();
        assert_eq!(p.part("Top").unwrap().pose.position, Vec3::new(0.0, 0.0, 0.7));
        assert_eq!(p.canvas, a.canvas);
    }

    #[test]
    fn mllm_proposal_retries_after_syntax_error() {
        let bad = FixtureEntry::new("proposal2code", "Table", 0, "```protoscene\npart \"Top\" { cuboid dims [1, 0.6] }\n```");
        let mut good = FixtureEntry::new("proposal2code", "Table", 0, &format!("```protoscene\n{TABLE}\n```"));
        good.attempt = 1;
        let c = client(vec![bad, good]);
        let p = proposal_to_code(&q(), &Arrangement::default(), ProposalMode::Mllm, &c).unwrap();
        assert_eq!(p.labels(), vec!["Top", "Leg1"]);
        assert_eq!(c.transcript.len(), 2);
    }

    #[test]
    fn refiner_falls_back_to_previous_program() {
        let prev = parse_program(TABLE).unwrap();
        let c = client(vec![FixtureEntry::new("refiner", "Table", 2, "I cannot do that.")]);
        let out = refine_code(&q(), &prev, None, 2, &c).unwrap();
        assert!(out.fell_back);
        assert_eq!(out.program, prev);
        assert!(out.note.is_some());
        assert_eq!(c.transcript.len(), 3);
    }

    #[test]
    fn refiner_swaps_primitives() {
        let prev = parse_program(TABLE).unwrap();
        let reply = "```protoscene\npart \"Top\" { cuboid dims [1, 0.6, 0.05] pos [0, 0, 0.7] rot [0, 0, 0] }\npart \"Leg1\" { cylinder 0.025 0.7 pos [0.45, 0.25, 0.35] rot [0, 0, 0] }\n```";
        let c = client(vec![FixtureEntry::new("refiner", "Table", 0, reply)]);
        let out = refine_code(&q(), &prev, None, 0, &c).unwrap();
        assert!(!out.fell_back);
        assert_eq!(out.program.part("Leg1").unwrap().primitive, Primitive::Cylinder { radius: 0.025, height: 0.7 });
    }

    #[test]
    fn edit_section_only_with_edits() {
        let prev = parse_program(TABLE).unwrap();
        let without = refine_prompt(&q(), &prev, None).unwrap();
        assert!(!without.contains("Edit Recommendations"));
        let edits = EditSet {
            edits: vec![Edit { aspect: "legs".into(), edit_type: "stretch".into(), command: "make legs longer".into() }],
        };
        let with = refine_prompt(&q(), &prev, Some(&edits)).unwrap();
        assert!(with.contains("Edit Recommendations:\n[\n  {\n    \"visual_aspect\": \"legs\""));
        assert!(with.contains("part \"Top\" { cuboid dims [1, 0.6, 0.05]"));
    }

    #[test]
    fn naive_baseline() {
        let one = "```\npart \"Body\" { sphere 0.3 pos [0, 0, 0.3] rot [0, 0, 0] }\n```";
        let p = run_naive(&q(), &client(vec![FixtureEntry::new("naive", "Table", 0, one)])).unwrap();
        assert_eq!(p.parts.len(), 1);
        let r = run_naive(&q(), &client(vec![FixtureEntry::new("naive", "Table", 0, "import bpy")]));
        assert!(matches!(r, Err(AgentError::MalformedResponse { .. })));
    }
}
