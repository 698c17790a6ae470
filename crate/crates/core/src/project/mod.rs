//! Project directory: inputs, the decision log, and phase artifacts.
//!
//! ```text
//! <project>/
//!   project.json          manifest: name, config, dataset list
//!   lexicon.txt           base lexicon, never rewritten
//!   datasets/<id>.csv     as imported
//!   datasets/<id>.meta
//!   decisions.log         append-only, JSON lines
//!   artifacts/{leg,etg,eg}.json
//!   history/eg.json       last assembled EG, for id continuity
//! ```
//!
//! Artifacts are derived from the inputs and the log alone. Writing one
//! removes everything downstream first, so a present artifact is never older
//! than its upstream.

mod fsutil;
pub mod log;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::dataset::{Dataset, DatasetError, DatasetId, DatasetMeta};
use crate::decision::{DecisionId, DecisionKind, ReviewStatus};
use crate::eg::{
    assemble_eg, detect_entities, export_jsonld, render_eg, reserved_ids, suggest_merges, Assembly, Eg, EgError,
    EntityCandidate, MergeCandidate, MergeEvidence, RenderedEg, RowRef,
};
use crate::etg::{
    build_etg, classify_elements, export_etg, suggest_matches, ElementClassification, Etg, EtgError, EtypeId,
    MatchCandidate,
};
use crate::leg::{build_leg, disambiguate_all, export_leg_sheet, extract_terms, Leg, LegError, SenseDecision, SenseStatus};
use crate::lexicon::{ConceptId, LanguageTag, LexicalResource, LexiconError};
use fsutil::{read_json, remove_if_exists, write_atomic, write_json, Lock};
pub use log::{Actor, LogEntry, Resolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Leg,
    Etg,
    Eg,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Leg, Phase::Etg, Phase::Eg];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Leg => "leg",
            Phase::Etg => "etg",
            Phase::Eg => "eg",
        }
    }

    pub fn upstream(self) -> Option<Phase> {
        match self {
            Phase::Leg => None,
            Phase::Etg => Some(Phase::Leg),
            Phase::Eg => Some(Phase::Etg),
        }
    }

    /// This phase and every later one.
    fn and_downstream(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| *p >= self)
    }

    pub fn owning(kind: DecisionKind) -> Phase {
        match kind {
            DecisionKind::Sense => Phase::Leg,
            DecisionKind::Match => Phase::Etg,
            DecisionKind::Merge | DecisionKind::EtypeReseat => Phase::Eg,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = ProjectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "leg" => Ok(Phase::Leg),
            "etg" => Ok(Phase::Etg),
            "eg" => Ok(Phase::Eg),
            _ => Err(ProjectError::BadRequest(format!("unknown phase '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Tsv,
    Ttl,
    JsonLd,
    Json,
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExportFormat::Tsv => "tsv",
            ExportFormat::Ttl => "ttl",
            ExportFormat::JsonLd => "jsonld",
            ExportFormat::Json => "json",
        })
    }
}

impl FromStr for ExportFormat {
    type Err = ProjectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(ExportFormat::Tsv),
            "ttl" => Ok(ExportFormat::Ttl),
            "jsonld" => Ok(ExportFormat::JsonLd),
            "json" => Ok(ExportFormat::Json),
            _ => Err(ProjectError::BadRequest(format!("unknown format '{s}'"))),
        }
    }
}

/// How a caller should treat an error: HTTP status and exit code follow it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    BadRequest,
    NotFound,
    Conflict,
    Internal,
}

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{0} already exists")]
    Exists(PathBuf),
    #[error("no project at {0}")]
    NotFound(PathBuf),
    #[error("invalid project name '{0}'")]
    BadName(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("a dataset named '{0}' is already imported")]
    DuplicateDataset(String),
    #[error("phase {phase} needs phase {requires} to run first")]
    Dependency { phase: Phase, requires: Phase },
    #[error("phase {phase} has pending decisions: {}", join(.ids))]
    Pending { phase: Phase, ids: Vec<DecisionId> },
    #[error("unknown decision {0}")]
    UnknownDecision(DecisionId),
    #[error("resolution does not apply to {id}: {reason}")]
    BadResolution { id: DecisionId, reason: String },
    #[error("resolution of {id} was refused: {reason}")]
    Refused { id: DecisionId, reason: String },
    #[error(transparent)]
    Leg(#[from] LegError),
    #[error(transparent)]
    Etg(#[from] EtgError),
    #[error(transparent)]
    Eg(#[from] EgError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt project: {0}")]
    Corrupt(String),
}

fn join(ids: &[DecisionId]) -> String {
    ids.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(", ")
}

impl ProjectError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ProjectError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        use ProjectError::*;
        match self {
            NotFound(_) | UnknownDecision(_) => ErrorClass::NotFound,
            Exists(_) | DuplicateDataset(_) | Dependency { .. } | Pending { .. } | Refused { .. } => {
                ErrorClass::Conflict
            }
            Leg(LegError::Unresolved(_)) | Etg(EtgError::Unresolved(_)) | Eg(EgError::Unresolved(_)) => {
                ErrorClass::Conflict
            }
            Etg(EtgError::Incoherent { .. }) | Eg(EgError::IncomparableEtypes { .. }) => ErrorClass::Conflict,
            Eg(EgError::IdCollision(_)) | Etg(EtgError::Violations(_)) | Io { .. } | Corrupt(_) => {
                ErrorClass::Internal
            }
            _ => ErrorClass::BadRequest,
        }
    }

    /// Decision ids that block the request, if any.
    pub fn blocking(&self) -> Vec<DecisionId> {
        match self {
            ProjectError::Pending { ids, .. }
            | ProjectError::Leg(LegError::Unresolved(ids))
            | ProjectError::Etg(EtgError::Unresolved(ids))
            | ProjectError::Eg(EgError::Unresolved(ids)) => ids.clone(),
            ProjectError::Refused { id, .. } => vec![id.clone()],
            _ => Vec::new(),
        }
    }
}

pub type Result<T, E = ProjectError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: DatasetId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub name: String,
    pub config: Config,
    pub datasets: Vec<DatasetEntry>,
    pub next_dataset: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegArtifact {
    pub senses: Vec<SenseDecision>,
    /// Present once every sense is resolved.
    pub leg: Option<Leg>,
    /// Base lexicon plus the enrichments recorded in the log.
    pub lexicon: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtgArtifact {
    pub classifications: Vec<ElementClassification>,
    pub matches: Vec<MatchCandidate>,
    /// Present once every match is resolved.
    pub etg: Option<Etg>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgArtifact {
    pub candidates: Vec<EntityCandidate>,
    pub merges: Vec<MergeCandidate>,
    pub reseats: Vec<(RowRef, EtypeId)>,
    /// Present once every merge is resolved.
    pub eg: Option<Eg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: Phase,
    pub counts: BTreeMap<String, usize>,
    pub pending: Vec<DecisionId>,
    /// The phase produced its graph; false while decisions are pending.
    pub complete: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subject", rename_all = "kebab-case")]
pub enum DecisionDetail {
    Sense(SenseDecision),
    Match(MatchCandidate),
    Merge(MergeCandidate),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub id: DecisionId,
    pub kind: DecisionKind,
    pub phase: Phase,
    pub pending: bool,
    pub detail: DecisionDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub entry: LogEntry,
    pub report: PhaseReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub id: String,
    pub name: String,
    pub datasets: Vec<DatasetEntry>,
    /// Phases with a stored artifact, and whether each is complete.
    pub phases: BTreeMap<Phase, bool>,
    pub pending: usize,
    pub log_entries: usize,
}

pub fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphanumeric())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// A directory holding one project per subdirectory; the subdirectory name
/// is the project id.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> Result<PathBuf> {
        if valid_name(id) {
            Ok(self.root.join(id))
        } else {
            Err(ProjectError::BadName(id.to_string()))
        }
    }

    pub fn open(&self, id: &str) -> Result<Project> {
        let dir = self.dir(id).map_err(|_| ProjectError::NotFound(self.root.join(id)))?;
        Project::open(&dir)
    }

    pub fn create(&self, id: &str, config: Config, lexicon: &str) -> Result<Project> {
        Project::init_from_text(&self.dir(id)?, config, lexicon)
    }

    /// Ids of the projects in the workspace, sorted.
    pub fn list(&self) -> Result<Vec<String>> {
        let entries = match std::fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(ProjectError::io(&self.root, e)),
        };
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| ProjectError::io(&self.root, e))?;
            if let Some(name) = entry.file_name().to_str() {
                if valid_name(name) && entry.path().join("project.json").is_file() {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}

#[derive(Debug, Clone)]
pub struct Project {
    root: PathBuf,
}

impl Project {
    /// Creates `dir` holding a new project. Nothing is left behind on failure.
    pub fn init(dir: &Path, config: Config, lexicon: &Path) -> Result<Project> {
        let text = std::fs::read_to_string(lexicon).map_err(|e| ProjectError::io(lexicon, e))?;
        Project::init_from_text(dir, config, &text)
    }

    pub fn init_from_text(dir: &Path, config: Config, lexicon: &str) -> Result<Project> {
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .filter(|n| valid_name(n))
            .ok_or_else(|| ProjectError::BadName(dir.display().to_string()))?
            .to_string();
        lexicon.parse::<LexicalResource>()?;
        if dir.exists() {
            return Err(ProjectError::Exists(dir.to_path_buf()));
        }
        let parent = match dir.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&parent).map_err(|e| ProjectError::io(&parent, e))?;
        let staging = tempfile::Builder::new()
            .prefix(".strata-init-")
            .tempdir_in(&parent)
            .map_err(|e| ProjectError::io(&parent, e))?;
        let manifest = Manifest {
            id: name.clone(),
            name,
            config,
            datasets: Vec::new(),
            next_dataset: 1,
        };
        let stage = staging.path();
        for sub in ["datasets", "artifacts", "history"] {
            std::fs::create_dir(stage.join(sub)).map_err(|e| ProjectError::io(stage, e))?;
        }
        write_atomic(&stage.join("lexicon.txt"), lexicon.as_bytes())?;
        write_atomic(&stage.join("decisions.log"), b"")?;
        write_json(&stage.join("project.json"), &manifest)?;
        let staged = staging.keep();
        if let Err(e) = std::fs::rename(&staged, dir) {
            let _ = std::fs::remove_dir_all(&staged);
            return Err(if dir.exists() {
                ProjectError::Exists(dir.to_path_buf())
            } else {
                ProjectError::io(dir, e)
            });
        }
        Ok(Project {
            root: dir.to_path_buf(),
        })
    }

    pub fn open(dir: &Path) -> Result<Project> {
        if !dir.join("project.json").is_file() {
            return Err(ProjectError::NotFound(dir.to_path_buf()));
        }
        Ok(Project {
            root: dir.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn artifact_path(&self, phase: Phase) -> PathBuf {
        self.root.join("artifacts").join(format!("{phase}.json"))
    }

    fn write_lock(&self) -> Result<Lock> {
        Lock::exclusive(&self.path(".lock"))
    }

    fn read_lock(&self) -> Result<Lock> {
        Lock::shared(&self.path(".lock"))
    }

    fn load_manifest(&self) -> Result<Manifest> {
        read_json(&self.path("project.json"))?.ok_or_else(|| ProjectError::NotFound(self.root.clone()))
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let _lock = self.read_lock()?;
        self.load_manifest()
    }

    fn base_lexicon(&self) -> Result<LexicalResource> {
        let path = self.path("lexicon.txt");
        let text = std::fs::read_to_string(&path).map_err(|e| ProjectError::io(&path, e))?;
        Ok(text.parse()?)
    }

    fn load_datasets(&self, manifest: &Manifest) -> Result<Vec<Dataset>> {
        let dir = self.path("datasets");
        manifest
            .datasets
            .iter()
            .map(|d| {
                let read = |ext: &str| {
                    let p = dir.join(format!("{}.{ext}", d.id));
                    std::fs::read_to_string(&p).map_err(|e| ProjectError::io(&p, e))
                };
                let meta = DatasetMeta::parse(&read("meta")?)?;
                Ok(Dataset::from_csv(d.id.clone(), &read("csv")?, meta)?)
            })
            .collect()
    }

    pub fn datasets(&self) -> Result<Vec<Dataset>> {
        let _lock = self.read_lock()?;
        self.load_datasets(&self.load_manifest()?)
    }

    fn load_log(&self) -> Result<Vec<LogEntry>> {
        log::read(&self.path("decisions.log"))
    }

    pub fn log(&self) -> Result<Vec<LogEntry>> {
        let _lock = self.read_lock()?;
        self.load_log()
    }

    fn invalidate_from(&self, phase: Phase) -> Result<()> {
        // downstream first, so a crash never leaves a newer upstream behind
        for p in phase.and_downstream().collect::<Vec<_>>().into_iter().rev() {
            remove_if_exists(&self.artifact_path(p))?;
        }
        Ok(())
    }

    pub fn import_dataset(&self, csv: &Path, meta: &Path) -> Result<DatasetId> {
        let csv_text = std::fs::read_to_string(csv).map_err(|e| ProjectError::io(csv, e))?;
        let meta_text = std::fs::read_to_string(meta).map_err(|e| ProjectError::io(meta, e))?;
        self.import_dataset_text(&csv_text, &meta_text)
    }

    /// Stores a dataset verbatim after checking it parses.
    pub fn import_dataset_text(&self, csv: &str, meta: &str) -> Result<DatasetId> {
        let _lock = self.write_lock()?;
        let mut manifest = self.load_manifest()?;
        let parsed = DatasetMeta::parse(meta)?;
        let id = DatasetId::new(format!("d{}", manifest.next_dataset));
        Dataset::from_csv(id.clone(), csv, parsed.clone())?;
        if manifest.datasets.iter().any(|d| d.name == parsed.name) {
            return Err(ProjectError::DuplicateDataset(parsed.name));
        }
        self.invalidate_from(Phase::Leg)?;
        let dir = self.path("datasets");
        write_atomic(&dir.join(format!("{id}.csv")), csv.as_bytes())?;
        write_atomic(&dir.join(format!("{id}.meta")), meta.as_bytes())?;
        manifest.datasets.push(DatasetEntry {
            id: id.clone(),
            name: parsed.name,
        });
        manifest.next_dataset += 1;
        write_json(&self.path("project.json"), &manifest)?;
        Ok(id)
    }

    /// Replaces the configuration; every artifact depends on it.
    pub fn set_config(&self, config: Config) -> Result<()> {
        let _lock = self.write_lock()?;
        let mut manifest = self.load_manifest()?;
        self.invalidate_from(Phase::Leg)?;
        manifest.config = config;
        write_json(&self.path("project.json"), &manifest)
    }

    fn load_artifact<T: serde::de::DeserializeOwned>(&self, phase: Phase) -> Result<Option<T>> {
        read_json(&self.artifact_path(phase))
    }

    fn leg_artifact(&self) -> Result<Option<LegArtifact>> {
        self.load_artifact(Phase::Leg)
    }

    fn etg_artifact(&self) -> Result<Option<EtgArtifact>> {
        self.load_artifact(Phase::Etg)
    }

    fn eg_artifact(&self) -> Result<Option<EgArtifact>> {
        self.load_artifact(Phase::Eg)
    }

    /// Upstream artifacts a phase needs, or the reason it cannot run.
    fn upstream(&self, phase: Phase) -> Result<Upstream> {
        let mut up = Upstream::default();
        if phase >= Phase::Etg {
            let leg = self.leg_artifact()?.ok_or(ProjectError::Dependency {
                phase,
                requires: Phase::Leg,
            })?;
            if leg.leg.is_none() {
                return Err(ProjectError::Pending {
                    phase: Phase::Leg,
                    ids: pending_senses(&leg.senses),
                });
            }
            up.leg = Some(leg);
        }
        if phase >= Phase::Eg {
            let etg = self.etg_artifact()?.ok_or(ProjectError::Dependency {
                phase,
                requires: Phase::Etg,
            })?;
            if etg.etg.is_none() {
                return Err(ProjectError::Pending {
                    phase: Phase::Etg,
                    ids: pending_matches(&etg.matches),
                });
            }
            up.etg = Some(etg);
        }
        Ok(up)
    }

    fn compute(&self, phase: Phase, manifest: &Manifest, log: &[LogEntry]) -> Result<Computed> {
        let datasets = self.load_datasets(manifest)?;
        let up = self.upstream(phase)?;
        match phase {
            Phase::Leg => {
                let base = self.base_lexicon()?;
                Ok(Computed::Leg(compute_leg(&manifest.id, base, &datasets, &manifest.config, log)?))
            }
            Phase::Etg => {
                let leg = up.leg.expect("checked upstream");
                Ok(Computed::Etg(compute_etg(&leg, &datasets, &manifest.config, log)?))
            }
            Phase::Eg => {
                let leg = up.leg.expect("checked upstream");
                let etg = up.etg.expect("checked upstream");
                let previous: Option<Eg> = read_json(&self.path("history/eg.json"))?;
                Ok(Computed::Eg(compute_eg(
                    &leg,
                    &etg,
                    &datasets,
                    &manifest.config,
                    log,
                    previous.as_ref(),
                )?))
            }
        }
    }

    /// Stores a freshly computed artifact, dropping everything downstream.
    fn store(&self, computed: &Computed, log: &[LogEntry]) -> Result<()> {
        let phase = computed.phase();
        self.invalidate_from(phase)?;
        match computed {
            Computed::Leg(a) => write_json(&self.artifact_path(phase), a)?,
            Computed::Etg(a) => write_json(&self.artifact_path(phase), a)?,
            Computed::Eg(a) => {
                write_json(&self.artifact_path(phase), a)?;
                if let Some(eg) = &a.eg {
                    write_json(&self.path("history/eg.json"), eg)?;
                }
            }
        }
        let auto = computed.auto_resolutions(log);
        if !auto.is_empty() {
            let mut seq = log.last().map_or(0, |e| e.seq);
            let now = now_millis();
            let entries: Vec<LogEntry> = auto
                .into_iter()
                .map(|(decision, resolution)| {
                    seq += 1;
                    LogEntry {
                        seq,
                        timestamp: now,
                        kind: decision.kind().expect("derived ids carry a kind"),
                        decision,
                        resolution,
                        actor: Actor::Auto,
                    }
                })
                .collect();
            log::append(&self.path("decisions.log"), &entries)?;
        }
        Ok(())
    }

    pub fn run_phase(&self, phase: Phase) -> Result<PhaseReport> {
        let _lock = self.write_lock()?;
        let manifest = self.load_manifest()?;
        let log = self.load_log()?;
        let computed = self.compute(phase, &manifest, &log)?;
        self.store(&computed, &log)?;
        Ok(computed.report())
    }

    /// Runs the phases in order, stopping after the first one that leaves
    /// decisions pending.
    pub fn run_all(&self) -> Result<Vec<PhaseReport>> {
        let mut out = Vec::new();
        for phase in Phase::ALL {
            let report = self.run_phase(phase)?;
            let done = report.complete;
            out.push(report);
            if !done {
                break;
            }
        }
        Ok(out)
    }

    /// Every decision the stored artifacts know, ordered by phase and id.
    pub fn decisions(&self, pending_only: bool) -> Result<Vec<DecisionSummary>> {
        let _lock = self.read_lock()?;
        let mut out = Vec::new();
        if let Some(a) = self.leg_artifact()? {
            for s in a.senses {
                let pending = !s.status.is_resolved();
                out.push(DecisionSummary {
                    id: s.id.clone(),
                    kind: DecisionKind::Sense,
                    phase: Phase::Leg,
                    pending,
                    detail: DecisionDetail::Sense(s),
                });
            }
        }
        if let Some(a) = self.etg_artifact()? {
            for m in a.matches {
                out.push(DecisionSummary {
                    id: m.id.clone(),
                    kind: DecisionKind::Match,
                    phase: Phase::Etg,
                    pending: m.status == ReviewStatus::Suggested,
                    detail: DecisionDetail::Match(m),
                });
            }
        }
        if let Some(a) = self.eg_artifact()? {
            for m in a.merges {
                out.push(DecisionSummary {
                    id: m.id.clone(),
                    kind: DecisionKind::Merge,
                    phase: Phase::Eg,
                    pending: m.status == ReviewStatus::Suggested,
                    detail: DecisionDetail::Merge(m),
                });
            }
        }
        if pending_only {
            out.retain(|d| d.pending);
        }
        out.sort_by(|a, b| (a.phase, &a.id).cmp(&(b.phase, &b.id)));
        Ok(out)
    }

    /// Records a user resolution, re-runs the owning phase with it, and drops
    /// downstream artifacts. A resolution that cannot be applied leaves the
    /// log and the artifacts untouched.
    pub fn submit_decision(&self, id: &DecisionId, resolution: Resolution) -> Result<SubmitOutcome> {
        let _lock = self.write_lock()?;
        let kind = id.kind().ok_or_else(|| ProjectError::UnknownDecision(id.clone()))?;
        self.check_known(id, kind, &resolution)?;
        if !resolution.fits(kind) {
            return Err(ProjectError::BadResolution {
                id: id.clone(),
                reason: format!("a {} decision cannot be resolved that way", kind_name(kind)),
            });
        }
        let phase = Phase::owning(kind);

        let manifest = self.load_manifest()?;
        let mut log = self.load_log()?;
        let entry = LogEntry {
            seq: log.last().map_or(1, |e| e.seq + 1),
            timestamp: now_millis(),
            kind,
            decision: id.clone(),
            resolution,
            actor: Actor::User,
        };
        log.push(entry.clone());
        let computed = self.compute(phase, &manifest, &log).map_err(|e| match e {
            ProjectError::Io { .. } | ProjectError::Corrupt(_) => e,
            other => ProjectError::Refused {
                id: id.clone(),
                reason: other.to_string(),
            },
        })?;
        self.invalidate_from(phase)?;
        log::append(&self.path("decisions.log"), std::slice::from_ref(&entry))?;
        self.store(&computed, &log)?;
        Ok(SubmitOutcome {
            entry,
            report: computed.report(),
        })
    }

    /// The decision must be known to the stored artifact of its phase and
    /// the resolution must make sense for it.
    fn check_known(&self, id: &DecisionId, kind: DecisionKind, resolution: &Resolution) -> Result<()> {
        let unknown = || ProjectError::UnknownDecision(id.clone());
        match kind {
            DecisionKind::Sense => {
                let a = self.leg_artifact()?.ok_or_else(unknown)?;
                let s = a.senses.iter().find(|s| &s.id == id).ok_or_else(unknown)?;
                if let Resolution::Choose { concept, force } = resolution {
                    let resource: LexicalResource = a.lexicon.parse()?;
                    if !resource.contains(*concept) {
                        return Err(ProjectError::BadResolution {
                            id: id.clone(),
                            reason: format!("unknown concept {concept}"),
                        });
                    }
                    if !force && !s.has_candidate(*concept) {
                        return Err(ProjectError::BadResolution {
                            id: id.clone(),
                            reason: format!("concept {concept} is not a candidate; resubmit with force"),
                        });
                    }
                }
            }
            DecisionKind::Match => {
                let a = self.etg_artifact()?.ok_or_else(unknown)?;
                a.matches.iter().find(|m| &m.id == id).ok_or_else(unknown)?;
            }
            DecisionKind::Merge => {
                let a = self.eg_artifact()?.ok_or_else(unknown)?;
                a.merges.iter().find(|m| &m.id == id).ok_or_else(unknown)?;
            }
            DecisionKind::EtypeReseat => {
                let a = self.eg_artifact()?.ok_or_else(unknown)?;
                let row = reseat_row(id).ok_or_else(unknown)?;
                if !a.candidates.iter().any(|c| c.row_ref() == row) {
                    return Err(unknown());
                }
            }
        }
        Ok(())
    }

    /// Appends entries recorded elsewhere (for instance another project's
    /// log) with fresh sequence numbers and drops every artifact; the next
    /// phase runs apply them.
    pub fn append_recorded(&self, entries: &[LogEntry]) -> Result<()> {
        let _lock = self.write_lock()?;
        let log = self.load_log()?;
        let mut seq = log.last().map_or(0, |e| e.seq);
        let renumbered: Vec<LogEntry> = entries
            .iter()
            .map(|e| {
                seq += 1;
                LogEntry { seq, ..e.clone() }
            })
            .collect();
        for e in &renumbered {
            if e.decision.kind() != Some(e.kind) || !e.resolution.fits(e.kind) {
                return Err(ProjectError::BadResolution {
                    id: e.decision.clone(),
                    reason: "resolution does not fit the decision kind".into(),
                });
            }
        }
        self.invalidate_from(Phase::Leg)?;
        log::append(&self.path("decisions.log"), &renumbered)
    }

    pub fn export(&self, what: Phase, format: ExportFormat) -> Result<String> {
        let _lock = self.read_lock()?;
        let not_run = || ProjectError::Dependency {
            phase: what,
            requires: what,
        };
        let native = match what {
            Phase::Leg => ExportFormat::Tsv,
            Phase::Etg => ExportFormat::Ttl,
            Phase::Eg => ExportFormat::JsonLd,
        };
        let unsupported = || ProjectError::BadRequest(format!("{what} exports as {native} or json, not {format}"));
        let json = |v: &dyn erased::Json| -> String { v.pretty() };
        match what {
            Phase::Leg => {
                let a = self.leg_artifact()?.ok_or_else(not_run)?;
                match format {
                    ExportFormat::Json => Ok(json(&a)),
                    ExportFormat::Tsv => {
                        let leg = a.leg.as_ref().ok_or_else(|| ProjectError::Pending {
                            phase: Phase::Leg,
                            ids: pending_senses(&a.senses),
                        })?;
                        Ok(export_leg_sheet(leg, &a.lexicon.parse()?)?)
                    }
                    _ => Err(unsupported()),
                }
            }
            Phase::Etg => {
                let a = self.etg_artifact()?.ok_or_else(not_run)?;
                match format {
                    ExportFormat::Json => Ok(json(&a)),
                    ExportFormat::Ttl => {
                        let etg = a.etg.as_ref().ok_or_else(|| ProjectError::Pending {
                            phase: Phase::Etg,
                            ids: pending_matches(&a.matches),
                        })?;
                        let leg = self.leg_artifact()?.and_then(|l| l.leg.map(|g| (g, l.lexicon)));
                        let (leg, lexicon) = leg.ok_or_else(not_run)?;
                        Ok(export_etg(etg, &leg, &lexicon.parse()?)?)
                    }
                    _ => Err(unsupported()),
                }
            }
            Phase::Eg => {
                let a = self.eg_artifact()?.ok_or_else(not_run)?;
                match format {
                    ExportFormat::Json => Ok(json(&a)),
                    ExportFormat::JsonLd => {
                        let eg = a.eg.as_ref().ok_or_else(|| ProjectError::Pending {
                            phase: Phase::Eg,
                            ids: pending_merges(&a.merges),
                        })?;
                        let etg = self.etg_artifact()?.and_then(|e| e.etg).ok_or_else(not_run)?;
                        Ok(export_jsonld(eg, &etg)?)
                    }
                    _ => Err(unsupported()),
                }
            }
        }
    }

    pub fn render(&self, language: &LanguageTag) -> Result<RenderedEg> {
        let _lock = self.read_lock()?;
        let not_run = || ProjectError::Dependency {
            phase: Phase::Eg,
            requires: Phase::Eg,
        };
        let eg_art = self.eg_artifact()?.ok_or_else(not_run)?;
        let eg = eg_art.eg.ok_or_else(|| ProjectError::Pending {
            phase: Phase::Eg,
            ids: pending_merges(&eg_art.merges),
        })?;
        let etg = self.etg_artifact()?.and_then(|a| a.etg).ok_or_else(not_run)?;
        let leg_art = self.leg_artifact()?.ok_or_else(not_run)?;
        let leg = leg_art.leg.ok_or_else(not_run)?;
        let resource: LexicalResource = leg_art.lexicon.parse()?;
        Ok(render_eg(&eg, &etg, &leg, &resource, language)?)
    }

    pub fn summary(&self) -> Result<ProjectSummary> {
        let manifest = self.manifest()?;
        let pending = self.decisions(true)?.len();
        let _lock = self.read_lock()?;
        let mut phases = BTreeMap::new();
        if let Some(a) = self.leg_artifact()? {
            phases.insert(Phase::Leg, a.leg.is_some());
        }
        if let Some(a) = self.etg_artifact()? {
            phases.insert(Phase::Etg, a.etg.is_some());
        }
        if let Some(a) = self.eg_artifact()? {
            phases.insert(Phase::Eg, a.eg.is_some());
        }
        Ok(ProjectSummary {
            id: manifest.id,
            name: manifest.name,
            datasets: manifest.datasets,
            phases,
            pending,
            log_entries: self.load_log()?.len(),
        })
    }

    /// Copies the inputs and the decision log, but no artifacts or id
    /// history, into a new project at `dest`.
    pub fn clone_inputs(&self, dest: &Path) -> Result<Project> {
        let _lock = self.read_lock()?;
        let manifest = self.load_manifest()?;
        let lexicon = std::fs::read_to_string(self.path("lexicon.txt")).map_err(|e| ProjectError::io(&self.root, e))?;
        let clone = Project::init_from_text(dest, manifest.config.clone(), &lexicon)?;
        let src = self.path("datasets");
        let dst = clone.path("datasets");
        for d in &manifest.datasets {
            for ext in ["csv", "meta"] {
                let name = format!("{}.{ext}", d.id);
                std::fs::copy(src.join(&name), dst.join(&name)).map_err(|e| ProjectError::io(&src, e))?;
            }
        }
        let log = std::fs::read(self.path("decisions.log")).map_err(|e| ProjectError::io(&self.root, e))?;
        write_atomic(&clone.path("decisions.log"), &log)?;
        let mut cloned = manifest;
        cloned.id = clone.load_manifest()?.id;
        write_json(&clone.path("project.json"), &cloned)?;
        Ok(clone)
    }
}

fn kind_name(kind: DecisionKind) -> &'static str {
    match kind {
        DecisionKind::Sense => "sense",
        DecisionKind::Match => "match",
        DecisionKind::Merge => "merge",
        DecisionKind::EtypeReseat => "etype-reseat",
    }
}

fn reseat_row(id: &DecisionId) -> Option<RowRef> {
    let (dataset, row) = id.as_str().strip_prefix("r:")?.rsplit_once(".r")?;
    Some(RowRef {
        dataset: DatasetId::new(dataset),
        row: row.parse().ok()?,
    })
}

mod erased {
    pub trait Json {
        fn pretty(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn pretty(&self) -> String {
            let mut s = serde_json::to_string_pretty(self).expect("artifacts serialize");
            s.push('\n');
            s
        }
    }
}

#[derive(Default)]
struct Upstream {
    leg: Option<LegArtifact>,
    etg: Option<EtgArtifact>,
}

enum Computed {
    Leg(LegArtifact),
    Etg(EtgArtifact),
    Eg(EgArtifact),
}

impl Computed {
    fn phase(&self) -> Phase {
        match self {
            Computed::Leg(_) => Phase::Leg,
            Computed::Etg(_) => Phase::Etg,
            Computed::Eg(_) => Phase::Eg,
        }
    }

    fn report(&self) -> PhaseReport {
        let mut counts = BTreeMap::new();
        let mut count = |k: &str, v: usize| {
            counts.insert(k.to_string(), v);
        };
        let (pending, complete, warnings) = match self {
            Computed::Leg(a) => {
                let auto = a.senses.iter().filter(|s| matches!(s.status, SenseStatus::Auto(_))).count();
                let pending = pending_senses(&a.senses);
                count("terms", a.senses.len());
                count("auto", auto);
                count("resolved", a.senses.len() - auto - pending.len());
                count("pending", pending.len());
                count("concepts", a.leg.as_ref().map_or(0, |l| l.nodes.len()));
                (pending, a.leg.is_some(), Vec::new())
            }
            Computed::Etg(a) => {
                let pending = pending_matches(&a.matches);
                count("matches", a.matches.len());
                count(
                    "accepted",
                    a.matches.iter().filter(|m| m.status == ReviewStatus::Accepted).count(),
                );
                count("pending", pending.len());
                count("etypes", a.etg.as_ref().map_or(0, |e| e.etypes.len()));
                count("properties", a.etg.as_ref().map_or(0, |e| e.properties.len()));
                let warnings = a.etg.as_ref().map(|e| e.warnings.clone()).unwrap_or_default();
                (pending, a.etg.is_some(), warnings)
            }
            Computed::Eg(a) => {
                let pending = pending_merges(&a.merges);
                count("candidates", a.candidates.len());
                count("merges", a.merges.len());
                count(
                    "accepted",
                    a.merges.iter().filter(|m| m.status == ReviewStatus::Accepted).count(),
                );
                count("pending", pending.len());
                count("entities", a.eg.as_ref().map_or(0, |e| e.entities.len()));
                let warnings = a.eg.as_ref().map(|e| e.warnings.clone()).unwrap_or_default();
                (pending, a.eg.is_some(), warnings)
            }
        };
        PhaseReport {
            phase: self.phase(),
            counts,
            pending,
            complete,
            warnings,
        }
    }

    /// Resolutions the phase derived on its own that the log has not seen.
    fn auto_resolutions(&self, log: &[LogEntry]) -> Vec<(DecisionId, Resolution)> {
        let logged: BTreeSet<&DecisionId> = log.iter().map(|e| &e.decision).collect();
        let mut out = Vec::new();
        match self {
            Computed::Leg(a) => {
                for s in &a.senses {
                    if let SenseStatus::Auto(concept) = s.status {
                        out.push((s.id.clone(), Resolution::Choose { concept, force: false }));
                    }
                }
            }
            Computed::Etg(a) => {
                for m in &a.matches {
                    if m.status == ReviewStatus::Accepted {
                        out.push((m.id.clone(), Resolution::Accept));
                    }
                }
            }
            Computed::Eg(a) => {
                for m in &a.merges {
                    if m.status == ReviewStatus::Accepted && matches!(m.evidence, MergeEvidence::Identifying { .. }) {
                        out.push((m.id.clone(), Resolution::Accept));
                    }
                }
            }
        }
        out.retain(|(id, _)| !logged.contains(id));
        out
    }
}

fn pending_senses(senses: &[SenseDecision]) -> Vec<DecisionId> {
    senses
        .iter()
        .filter(|s| !s.status.is_resolved())
        .map(|s| s.id.clone())
        .collect()
}

fn pending_matches(matches: &[MatchCandidate]) -> Vec<DecisionId> {
    let mut ids: Vec<DecisionId> = matches
        .iter()
        .filter(|m| m.status == ReviewStatus::Suggested)
        .map(|m| m.id.clone())
        .collect();
    ids.sort();
    ids
}

fn pending_merges(merges: &[MergeCandidate]) -> Vec<DecisionId> {
    let mut ids: Vec<DecisionId> = merges
        .iter()
        .filter(|m| m.status == ReviewStatus::Suggested)
        .map(|m| m.id.clone())
        .collect();
    ids.sort();
    ids
}

/// Senses for every extracted term, with the logged resolutions applied on
/// top of a lexicon that already holds every logged enrichment.
pub fn compute_leg(
    project: &str,
    base: LexicalResource,
    datasets: &[Dataset],
    cfg: &Config,
    log: &[LogEntry],
) -> Result<LegArtifact> {
    let mut resource = base;
    let mut enriched: BTreeMap<&DecisionId, ConceptId> = BTreeMap::new();
    for e in log.iter().filter(|e| e.actor == Actor::User) {
        if let Resolution::Enrich { request } = &e.resolution {
            let concept = resource.enrich(request, project)?;
            enriched.insert(&e.decision, concept);
        }
    }
    let user = log::user_resolutions(log);
    let terms: Vec<_> = datasets.iter().flat_map(extract_terms).collect();
    let mut senses = disambiguate_all(&terms, &resource, &cfg.wsd);
    for s in &mut senses {
        match user.get(&s.id) {
            Some(Resolution::Choose { concept, .. }) => {
                resource.concept(*concept)?;
                s.status = if s.has_candidate(*concept) {
                    SenseStatus::Confirmed(*concept)
                } else {
                    SenseStatus::Overridden(*concept)
                };
            }
            Some(Resolution::Enrich { .. }) => {
                s.status = SenseStatus::Overridden(enriched[&s.id]);
            }
            _ => {}
        }
    }
    let leg = if senses.iter().all(|s| s.status.is_resolved()) {
        Some(build_leg(&senses, &resource)?)
    } else {
        None
    };
    Ok(LegArtifact {
        senses,
        leg,
        lexicon: resource.to_text(),
    })
}

/// Classification and match suggestions with logged resolutions applied.
/// Accepted matches between incomparable concepts are refused even while
/// other matches are still pending.
pub fn compute_etg(leg: &LegArtifact, datasets: &[Dataset], cfg: &Config, log: &[LogEntry]) -> Result<EtgArtifact> {
    let graph = leg.leg.as_ref().expect("complete LEG");
    let resource: LexicalResource = leg.lexicon.parse()?;
    let classifications = classify_elements(graph, datasets, &resource, cfg)?;
    let mut matches = suggest_matches(&classifications, &resource, cfg.match_floor)?;
    let user = log::user_resolutions(log);
    for m in &mut matches {
        match user.get(&m.id) {
            Some(Resolution::Accept) => m.status = ReviewStatus::Accepted,
            Some(Resolution::Reject) => m.status = ReviewStatus::Rejected,
            _ => {}
        }
    }
    let concept_of = |r: &crate::etg::ElementRef| {
        classifications
            .iter()
            .find(|c| c.dataset == r.dataset)
            .and_then(|c| c.concept_of(r.element))
    };
    for m in matches.iter().filter(|m| m.status == ReviewStatus::Accepted) {
        if let (Some(l), Some(r)) = (concept_of(&m.left), concept_of(&m.right)) {
            if !resource.comparable(l, r)? {
                return Err(EtgError::Incoherent {
                    left: m.left.clone(),
                    right: m.right.clone(),
                    left_concept: l,
                    right_concept: r,
                }
                .into());
            }
        }
    }
    let etg = if matches.iter().any(|m| m.status == ReviewStatus::Suggested) {
        None
    } else {
        Some(build_etg(&classifications, &matches, graph, &resource)?)
    };
    Ok(EtgArtifact {
        classifications,
        matches,
        etg,
    })
}

/// Entity candidates and merges with logged resolutions applied, assembled
/// once no merge is pending.
pub fn compute_eg(
    leg: &LegArtifact,
    etg: &EtgArtifact,
    datasets: &[Dataset],
    cfg: &Config,
    log: &[LogEntry],
    previous: Option<&Eg>,
) -> Result<EgArtifact> {
    let graph = etg.etg.as_ref().expect("complete ETG");
    let resource: LexicalResource = leg.lexicon.parse()?;
    let mut candidates = Vec::new();
    for d in datasets {
        candidates.extend(detect_entities(d, graph)?);
    }
    let mut merges = suggest_merges(&candidates, graph, &resource, cfg)?;
    let user = log::user_resolutions(log);
    for m in &mut merges {
        match user.get(&m.id) {
            Some(Resolution::Accept) => m.status = ReviewStatus::Accepted,
            Some(Resolution::Reject) => m.status = ReviewStatus::Rejected,
            _ => {}
        }
    }
    let mut reseats = BTreeMap::new();
    for (id, r) in &user {
        if let (Some(row), Resolution::Reseat { concept }) = (reseat_row(id), r) {
            let etype = graph.etype_by_concept(*concept).ok_or_else(|| ProjectError::BadResolution {
                id: (*id).clone(),
                reason: format!("concept {concept} is not an etype"),
            })?;
            reseats.insert(row, etype);
        }
    }
    let eg = if merges.iter().any(|m| m.status == ReviewStatus::Suggested) {
        None
    } else {
        let reserved = reserved_ids(datasets.iter().flat_map(|d| d.rows.iter().flatten().map(String::as_str)));
        Some(assemble_eg(
            Assembly {
                candidates: &candidates,
                merges: &merges,
                reseats: &reseats,
                previous,
                reserved: &reserved,
            },
            graph,
            &resource,
        )?)
    };
    Ok(EgArtifact {
        candidates,
        merges,
        reseats: reseats.into_iter().collect(),
        eg,
    })
}
