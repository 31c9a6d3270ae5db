use std::fmt;

use serde::{Deserialize, Serialize};

use crate::math::Vec3;

/// A category name, trimmed and non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Query(String);

impl Query {
    pub fn new(text: &str) -> Option<Query> {
        let t = text.trim();
        (!t.is_empty()).then(|| Query(t.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Query {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        Query::new(&s).ok_or_else(|| "query must not be empty".to_string())
    }
}

impl From<Query> for String {
    fn from(q: Query) -> String {
        q.0
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Metric bounding dimensions `(length, width, height)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Canvas {
    pub dims: Vec3,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartCount {
    pub label: String,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartDecomposition {
    pub entries: Vec<PartCount>,
}

impl PartDecomposition {
    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.label.as_str()).collect()
    }

    pub fn counts(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.count).collect()
    }

    pub fn total_instances(&self) -> u32 {
        self.entries.iter().map(|e| e.count).sum()
    }
}

/// One parametrized cuboid of a proposed layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrangementEntry {
    pub label: String,
    /// `(length, width, height)` in meters.
    pub dims: Vec3,
    /// Center of the cuboid.
    pub position: Vec3,
    /// Euler angles, radians.
    pub rotation: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Arrangement {
    pub entries: Vec<ArrangementEntry>,
    pub canvas: Option<Vec3>,
}

/// A recommended edit: which visual aspect, what kind of change, and the instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub aspect: String,
    pub edit_type: String,
    pub command: String,
}

/// Edit types the recommender prompt and the loop description mention.
pub const EDIT_TYPES: [&str; 7] = ["add", "remove", "delete", "move", "rotate", "stretch", "scale"];

impl Edit {
    pub fn has_known_type(&self) -> bool {
        EDIT_TYPES.contains(&self.edit_type.trim().to_lowercase().as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditSet {
    pub edits: Vec<Edit>,
}

impl EditSet {
    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }
}
