use std::fmt;

/// Prompt templates shipped with the crate. Slots are written `{name}`;
/// braces around anything that is not a slot of the template are kept verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Template {
    Metricizer,
    Decomposer,
    Arrangement,
    Proposal2Code,
    Refiner,
    RefinerEdits,
    Identifier,
    EditRecommender,
    Naive,
    Mapper,
}

pub const PROTOSCENE_REFERENCE: &str = include_str!("../../templates/protoscene_reference.txt");

impl Template {
    pub const ALL: [Template; 10] = [
        Template::Metricizer,
        Template::Decomposer,
        Template::Arrangement,
        Template::Proposal2Code,
        Template::Refiner,
        Template::RefinerEdits,
        Template::Identifier,
        Template::EditRecommender,
        Template::Naive,
        Template::Mapper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::Metricizer => "metricizer",
            Template::Decomposer => "decomposer",
            Template::Arrangement => "arrangement",
            Template::Proposal2Code => "proposal2code",
            Template::Refiner => "refiner",
            Template::RefinerEdits => "refiner_edits",
            Template::Identifier => "identifier",
            Template::EditRecommender => "edit_recommender",
            Template::Naive => "naive",
            Template::Mapper => "mapper",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Template::Metricizer => include_str!("../../templates/metricizer.txt"),
            Template::Decomposer => include_str!("../../templates/decomposer.txt"),
            Template::Arrangement => include_str!("../../templates/arrangement.txt"),
            Template::Proposal2Code => include_str!("../../templates/proposal2code.txt"),
            Template::Refiner => include_str!("../../templates/refiner.txt"),
            Template::RefinerEdits => include_str!("../../templates/refiner_edits.txt"),
            Template::Identifier => include_str!("../../templates/identifier.txt"),
            Template::EditRecommender => include_str!("../../templates/edit_recommender.txt"),
            Template::Naive => include_str!("../../templates/naive.txt"),
            Template::Mapper => include_str!("../../templates/mapper.txt"),
        }
    }

    pub fn slots(self) -> &'static [&'static str] {
        match self {
            Template::Metricizer => &["q"],
            Template::Decomposer => &["q", "n_parts"],
            Template::Arrangement => &["q", "C", "D"],
            Template::Proposal2Code => &["q", "L", "A"],
            Template::Refiner => &["q", "L", "P_prev", "E"],
            Template::RefinerEdits => &["E"],
            Template::Identifier => &["s", "p"],
            Template::EditRecommender => &["q", "q_hat"],
            Template::Naive => &["q", "L"],
            Template::Mapper => &["P", "T"],
        }
    }

    /// Substitutes every slot in one pass, so slot values are never re-expanded.
    pub fn fill(self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        for slot in self.slots() {
            if !values.iter().any(|(k, _)| k == slot) {
                return Err(TemplateError { template: self, slot: slot.to_string() });
            }
        }
        let text = self.text();
        let mut out = String::with_capacity(text.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
        let mut rest = text;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let hit = after.find('}').and_then(|close| {
                let name = &after[..close];
                self.slots()
                    .contains(&name)
                    .then(|| values.iter().find(|(k, _)| *k == name))
                    .flatten()
                    .map(|(_, v)| (close, *v))
            });
            match hit {
                Some((close, value)) => {
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("template {template} needs a value for slot {{{slot}}}")]
pub struct TemplateError {
    pub template: Template,
    pub slot: String,
}
