//! Append-only decision log, one JSON object per line.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ProjectError;
use crate::decision::{DecisionId, DecisionKind};
use crate::lexicon::{ConceptId, EnrichRequest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Resolution {
    /// Sense: pick a concept; outside the candidate list only with `force`.
    Choose {
        concept: ConceptId,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        force: bool,
    },
    /// Sense: extend the lexicon and pick the resulting concept.
    Enrich { request: EnrichRequest },
    /// Match or merge.
    Accept,
    Reject,
    /// Entity: move to the etype grounded in this (ancestor) concept.
    Reseat { concept: ConceptId },
}

impl Resolution {
    pub fn fits(&self, kind: DecisionKind) -> bool {
        matches!(
            (kind, self),
            (DecisionKind::Sense, Resolution::Choose { .. } | Resolution::Enrich { .. })
                | (DecisionKind::Match | DecisionKind::Merge, Resolution::Accept | Resolution::Reject)
                | (DecisionKind::EtypeReseat, Resolution::Reseat { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    Auto,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub kind: DecisionKind,
    pub decision: DecisionId,
    pub resolution: Resolution,
    pub actor: Actor,
}

pub fn read(path: &Path) -> Result<Vec<LogEntry>, ProjectError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(ProjectError::io(path, e)),
    };
    parse(&text)
}

pub fn parse(text: &str) -> Result<Vec<LogEntry>, ProjectError> {
    let mut out: Vec<LogEntry> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_str(line)
            .map_err(|e| ProjectError::Corrupt(format!("decision log line {}: {e}", i + 1)))?;
        if out.last().is_some_and(|last| last.seq >= entry.seq) {
            return Err(ProjectError::Corrupt(format!(
                "decision log line {}: sequence {} does not increase",
                i + 1,
                entry.seq
            )));
        }
        if entry.decision.kind() != Some(entry.kind) || !entry.resolution.fits(entry.kind) {
            return Err(ProjectError::Corrupt(format!(
                "decision log line {}: resolution does not fit {}",
                i + 1,
                entry.decision
            )));
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn append(path: &Path, entries: &[LogEntry]) -> Result<(), ProjectError> {
    let mut text = String::new();
    for e in entries {
        text.push_str(&serde_json::to_string(e).expect("log entries serialize"));
        text.push('\n');
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| ProjectError::io(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.sync_data())
        .map_err(|e| ProjectError::io(path, e))
}

/// Latest user resolution per decision. Automatic entries only document what
/// the pipeline derived and are derived again on replay.
pub fn user_resolutions(entries: &[LogEntry]) -> BTreeMap<&DecisionId, &Resolution> {
    entries
        .iter()
        .filter(|e| e.actor == Actor::User)
        .map(|e| (&e.decision, &e.resolution))
        .collect()
}
