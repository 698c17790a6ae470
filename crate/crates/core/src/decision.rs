use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a reviewable decision. Ids are derived from the subject of
/// the decision (dataset and locus), so they stay stable across re-runs:
/// `s:` sense, `m:` schema match, `g:` entity merge, `r:` etype re-seat.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionId(pub String);

impl DecisionId {
    pub fn new(id: impl Into<String>) -> Self {
        DecisionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn kind(&self) -> Option<DecisionKind> {
        match self.0.split_once(':')?.0 {
            "s" => Some(DecisionKind::Sense),
            "m" => Some(DecisionKind::Match),
            "g" => Some(DecisionKind::Merge),
            "r" => Some(DecisionKind::EtypeReseat),
            _ => None,
        }
    }
}

impl fmt::Display for DecisionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionKind {
    Sense,
    Match,
    Merge,
    EtypeReseat,
}

/// Review state shared by match and merge candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewStatus {
    Suggested,
    Accepted,
    Rejected,
}
