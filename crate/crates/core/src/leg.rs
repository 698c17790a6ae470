//! Language Entity Graph construction: term extraction, word sense
//! disambiguation, and the induced concept subgraph annotated with the input
//! terms and the dataset each term came from.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::WsdConfig;
use crate::dataset::{Dataset, DatasetId};
use crate::decision::DecisionId;
use crate::lexicon::{ConceptId, EnrichRequest, LanguageTag, LexicalResource, LexiconError};
use crate::text::{fold_lemma, is_literal, normalize_cell, split_qualified};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "at", rename_all = "lowercase")]
pub enum Locus {
    Table,
    Column { index: usize },
    Cell { row: usize, column: usize },
}

impl Locus {
    /// Compact form used inside decision ids: `t`, `c2`, `r0c3`.
    pub fn fragment(&self) -> String {
        match self {
            Locus::Table => "t".into(),
            Locus::Column { index } => format!("c{index}"),
            Locus::Cell { row, column } => format!("r{row}c{column}"),
        }
    }
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locus::Table => f.write_str("table"),
            Locus::Column { index } => write!(f, "column:{index}"),
            Locus::Cell { row, column } => write!(f, "cell:{row}:{column}"),
        }
    }
}

impl FromStr for Locus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<usize>().map_err(|_| format!("bad locus '{s}'"));
        match parts.as_slice() {
            ["table"] => Ok(Locus::Table),
            ["column", i] => Ok(Locus::Column { index: num(i)? }),
            ["cell", r, c] => Ok(Locus::Cell {
                row: num(r)?,
                column: num(c)?,
            }),
            _ => Err(format!("bad locus '{s}'")),
        }
    }
}

/// A word or multiword occurring in a dataset. Namespace-qualified surfaces
/// keep the full qualified form, but their language is the namespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Term {
    pub dataset: DatasetId,
    pub locus: Locus,
    pub surface: String,
    pub lemma: String,
    pub language: LanguageTag,
}

impl Term {
    fn new(dataset: &Dataset, surface: &str, locus: Locus) -> Term {
        let surface = normalize_cell(surface);
        let (language, local) = dataset.resolve(&surface);
        Term {
            dataset: dataset.id.clone(),
            locus,
            lemma: fold_lemma(local),
            language: language.clone(),
            surface: surface.clone(),
        }
    }

    pub fn decision_id(&self) -> DecisionId {
        DecisionId(format!("s:{}.{}", self.dataset, self.locus.fragment()))
    }
}

/// Table name, column headers left to right, then each distinct textual cell
/// value in row-major order. Numbers, dates and identifier codes are skipped.
pub fn extract_terms(dataset: &Dataset) -> Vec<Term> {
    let mut terms = Vec::new();
    if !dataset.name.trim().is_empty() {
        terms.push(Term::new(dataset, &dataset.name, Locus::Table));
    }
    for (index, header) in dataset.columns.iter().enumerate() {
        if !header.trim().is_empty() {
            terms.push(Term::new(dataset, header, Locus::Column { index }));
        }
    }
    let mut seen = BTreeSet::new();
    for (row, cells) in dataset.rows.iter().enumerate() {
        for (column, raw) in cells.iter().enumerate() {
            let value = normalize_cell(raw);
            if value.is_empty() || is_literal(&value) || !seen.insert(value.clone()) {
                continue;
            }
            terms.push(Term::new(dataset, &value, Locus::Cell { row, column }));
        }
    }
    terms
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredConcept {
    pub concept: ConceptId,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "concept", rename_all = "kebab-case")]
pub enum SenseStatus {
    Auto(ConceptId),
    Pending,
    Confirmed(ConceptId),
    Overridden(ConceptId),
    NewConceptRequested,
}

impl SenseStatus {
    pub fn chosen(&self) -> Option<ConceptId> {
        match self {
            SenseStatus::Auto(c) | SenseStatus::Confirmed(c) | SenseStatus::Overridden(c) => Some(*c),
            SenseStatus::Pending | SenseStatus::NewConceptRequested => None,
        }
    }

    pub fn is_resolved(&self) -> bool {
        self.chosen().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseDecision {
    pub id: DecisionId,
    pub term: Term,
    /// Best first.
    pub candidates: Vec<ScoredConcept>,
    pub status: SenseStatus,
}

impl SenseDecision {
    pub fn has_candidate(&self, concept: ConceptId) -> bool {
        self.candidates.iter().any(|c| c.concept == concept)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "resolution", rename_all = "kebab-case")]
pub enum SenseResolution {
    /// Pick a concept. Concepts outside the candidate list need `force`.
    Choose {
        concept: ConceptId,
        #[serde(default)]
        force: bool,
    },
    EnrichAndChoose { request: EnrichRequest },
}

#[derive(Debug, Error)]
pub enum LegError {
    #[error("unresolved sense decisions: {}", join(.0))]
    Unresolved(Vec<DecisionId>),
    #[error("concept {concept} is not a candidate of {decision}; resubmit with force to override")]
    NotCandidate {
        decision: DecisionId,
        concept: ConceptId,
    },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("sheet line {line}: {message}")]
    Sheet { line: usize, message: String },
}

fn join(ids: &[DecisionId]) -> String {
    ids.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(", ")
}

/// Scores every sense of `term` as
/// `context_weight · context + rank_weight · 1/(1 + rank)`, where `context`
/// is the best similarity between the sense and any sense of another term in
/// `context`. A lone sense is accepted automatically, several senses only
/// when the best clears `auto_score` by at least `auto_margin`.
pub fn disambiguate(
    term: &Term,
    context: &[Term],
    resource: &LexicalResource,
    cfg: &WsdConfig,
) -> SenseDecision {
    let senses = resource.lookup_senses(&term.lemma, &term.language);
    let context_senses: Vec<ConceptId> = context
        .iter()
        .filter(|t| !(t.dataset == term.dataset && t.locus == term.locus))
        .flat_map(|t| resource.lookup_senses(&t.lemma, &t.language))
        .collect();
    score_senses(term, &senses, &context_senses, resource, cfg)
}

fn score_senses(
    term: &Term,
    senses: &[ConceptId],
    context_senses: &[ConceptId],
    resource: &LexicalResource,
    cfg: &WsdConfig,
) -> SenseDecision {
    let mut candidates: Vec<ScoredConcept> = senses
        .iter()
        .enumerate()
        .map(|(rank, &concept)| {
            let context = context_senses
                .iter()
                .filter_map(|&other| resource.concept_similarity(concept, other).ok())
                .fold(0.0_f64, f64::max);
            let rank_score = 1.0 / (1.0 + rank as f64);
            ScoredConcept {
                concept,
                score: cfg.context_weight * context + cfg.rank_weight * rank_score,
            }
        })
        .collect();
    // stable: equal scores keep sense rank order
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
    let status = match candidates.as_slice() {
        [] => SenseStatus::NewConceptRequested,
        [only] => SenseStatus::Auto(only.concept),
        [top, second, ..] => {
            if top.score >= cfg.auto_score && top.score - second.score >= cfg.auto_margin {
                SenseStatus::Auto(top.concept)
            } else {
                SenseStatus::Pending
            }
        }
    };
    SenseDecision {
        id: term.decision_id(),
        term: term.clone(),
        candidates,
        status,
    }
}

/// Disambiguates every term against the other terms of its own dataset.
pub fn disambiguate_all(terms: &[Term], resource: &LexicalResource, cfg: &WsdConfig) -> Vec<SenseDecision> {
    let mut senses: HashMap<(&str, &LanguageTag), Vec<ConceptId>> = HashMap::new();
    for t in terms {
        senses
            .entry((t.lemma.as_str(), &t.language))
            .or_insert_with(|| resource.lookup_senses(&t.lemma, &t.language));
    }
    terms
        .iter()
        .map(|term| {
            let context: Vec<ConceptId> = terms
                .iter()
                .filter(|t| t.dataset == term.dataset && t.locus != term.locus)
                .flat_map(|t| senses[&(t.lemma.as_str(), &t.language)].iter().copied())
                .collect();
            score_senses(term, &senses[&(term.lemma.as_str(), &term.language)], &context, resource, cfg)
        })
        .collect()
}

/// What applying a resolution did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SenseOutcome {
    pub status: SenseStatus,
    /// The decision already had this exact status.
    pub unchanged: bool,
    /// Concept created by an enrich-and-choose resolution.
    pub enriched: Option<ConceptId>,
}

pub fn apply_sense_decision(
    decision: &mut SenseDecision,
    resolution: &SenseResolution,
    resource: &mut LexicalResource,
    project: &str,
) -> Result<SenseOutcome, LegError> {
    let (status, enriched) = match resolution {
        SenseResolution::Choose { concept, force } => {
            if decision.has_candidate(*concept) {
                (SenseStatus::Confirmed(*concept), None)
            } else if *force {
                resource.concept(*concept)?;
                (SenseStatus::Overridden(*concept), None)
            } else {
                return Err(LegError::NotCandidate {
                    decision: decision.id.clone(),
                    concept: *concept,
                });
            }
        }
        SenseResolution::EnrichAndChoose { request } => {
            let id = resource.enrich(request, project)?;
            let fresh = matches!(request, EnrichRequest::NewConcept { .. }).then_some(id);
            (SenseStatus::Overridden(id), fresh)
        }
    };
    let unchanged = decision.status == status;
    decision.status = status;
    Ok(SenseOutcome {
        status,
        unchanged,
        enriched,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leg {
    pub nodes: BTreeSet<ConceptId>,
    pub annotations: BTreeMap<ConceptId, BTreeSet<Term>>,
    /// `(child, parent)` pairs: the transitive reduction of the lexicon's
    /// ancestor relation restricted to `nodes`.
    pub edges: BTreeSet<(ConceptId, ConceptId)>,
}

impl Leg {
    pub fn parents_of(&self, concept: ConceptId) -> impl Iterator<Item = ConceptId> + '_ {
        self.edges
            .range((concept, ConceptId(0))..=(concept, ConceptId(u32::MAX)))
            .map(|(_, p)| *p)
    }

    /// Concept annotated with the term found at `(dataset, locus)`.
    pub fn concept_at(&self, dataset: &DatasetId, locus: Locus) -> Option<ConceptId> {
        self.annotations
            .iter()
            .find(|(_, terms)| terms.iter().any(|t| &t.dataset == dataset && t.locus == locus))
            .map(|(c, _)| *c)
    }

    /// `(dataset, locus) -> concept` for every annotation.
    pub fn locus_index(&self) -> BTreeMap<(DatasetId, Locus), ConceptId> {
        self.annotations
            .iter()
            .flat_map(|(c, terms)| terms.iter().map(move |t| ((t.dataset.clone(), t.locus), *c)))
            .collect()
    }

    /// Surface of the term annotated at `(dataset, locus)`.
    pub fn label_at(&self, dataset: &DatasetId, locus: Locus) -> Option<&str> {
        self.annotations
            .values()
            .flatten()
            .find(|t| &t.dataset == dataset && t.locus == locus)
            .map(|t| t.surface.as_str())
    }

    /// First annotating surface of a concept, preferring `language`.
    pub fn label_for(&self, concept: ConceptId, language: Option<&LanguageTag>) -> Option<&str> {
        let terms = self.annotations.get(&concept)?;
        language
            .and_then(|l| terms.iter().find(|t| &t.language == l))
            .or_else(|| terms.iter().next())
            .map(|t| t.surface.as_str())
    }
}

pub fn build_leg(decisions: &[SenseDecision], resource: &LexicalResource) -> Result<Leg, LegError> {
    let unresolved: Vec<DecisionId> = decisions
        .iter()
        .filter(|d| !d.status.is_resolved())
        .map(|d| d.id.clone())
        .collect();
    if !unresolved.is_empty() {
        return Err(LegError::Unresolved(unresolved));
    }
    let mut leg = Leg::default();
    for d in decisions {
        let concept = d.status.chosen().expect("resolved");
        resource.concept(concept)?;
        leg.nodes.insert(concept);
        leg.annotations.entry(concept).or_default().insert(d.term.clone());
    }
    leg.edges = resource.cover_edges(&leg.nodes)?;
    Ok(leg)
}

const SHEET_HEADER: [&str; 7] = ["concept", "gloss", "parent", "surface", "language", "dataset", "locus"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegSheetRow {
    pub concept: ConceptId,
    pub gloss: String,
    pub parents: Vec<ConceptId>,
    pub surface: String,
    pub language: LanguageTag,
    pub dataset: DatasetId,
    pub locus: Locus,
}

/// Tab-separated rendering of a LEG: one row per (concept, annotating term),
/// including glosses and in-graph parents so enriched concepts are fully
/// described.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LegSheet {
    pub rows: Vec<LegSheetRow>,
}

impl LegSheet {
    pub fn from_leg(leg: &Leg, resource: &LexicalResource) -> Result<Self, LegError> {
        let mut rows = Vec::new();
        for (&concept, terms) in &leg.annotations {
            let gloss = resource.concept(concept)?.gloss.clone();
            let parents: Vec<ConceptId> = leg.parents_of(concept).collect();
            let mut terms: Vec<&Term> = terms.iter().collect();
            terms.sort_by(|a, b| (&a.dataset, a.locus, &a.surface).cmp(&(&b.dataset, b.locus, &b.surface)));
            for t in terms {
                rows.push(LegSheetRow {
                    concept,
                    gloss: gloss.clone(),
                    parents: parents.clone(),
                    surface: t.surface.clone(),
                    language: t.language.clone(),
                    dataset: t.dataset.clone(),
                    locus: t.locus,
                });
            }
        }
        Ok(LegSheet { rows })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = SHEET_HEADER.join("\t");
        out.push('\n');
        for r in &self.rows {
            let parents = r.parents.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
            let fields = [
                r.concept.to_string(),
                escape(&r.gloss),
                parents,
                escape(&r.surface),
                r.language.to_string(),
                escape(r.dataset.as_str()),
                r.locus.to_string(),
            ];
            out.push_str(&fields.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, LegError> {
        let mut lines = text.lines().enumerate();
        let err = |line: usize, message: String| LegError::Sheet { line, message };
        match lines.next() {
            Some((_, h)) if h.split('\t').eq(SHEET_HEADER) => {}
            _ => return Err(err(1, "missing or wrong header".into())),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != SHEET_HEADER.len() {
                return Err(err(n, format!("expected {} fields, got {}", SHEET_HEADER.len(), f.len())));
            }
            let parents = if f[2].is_empty() {
                Vec::new()
            } else {
                f[2].split(',')
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| err(n, format!("bad parent: {e}")))?
            };
            rows.push(LegSheetRow {
                concept: f[0].parse().map_err(|e| err(n, format!("bad concept id: {e}")))?,
                gloss: unescape(f[1]),
                parents,
                surface: unescape(f[3]),
                language: LanguageTag::new(f[4]).map_err(|e| err(n, e.to_string()))?,
                dataset: DatasetId(unescape(f[5])),
                locus: f[6].parse().map_err(|e| err(n, e))?,
            });
        }
        Ok(LegSheet { rows })
    }

    /// Rebuilds the graph the sheet describes.
    pub fn to_leg(&self) -> Leg {
        let mut leg = Leg::default();
        for r in &self.rows {
            leg.nodes.insert(r.concept);
            for p in &r.parents {
                leg.edges.insert((r.concept, *p));
            }
            let local = if r.language.is_namespace() {
                split_qualified(&r.surface).map_or(r.surface.as_str(), |(_, l)| l)
            } else {
                r.surface.as_str()
            };
            leg.annotations.entry(r.concept).or_default().insert(Term {
                dataset: r.dataset.clone(),
                locus: r.locus,
                surface: r.surface.clone(),
                lemma: fold_lemma(local),
                language: r.language.clone(),
            });
        }
        leg
    }
}

pub fn export_leg_sheet(leg: &Leg, resource: &LexicalResource) -> Result<String, LegError> {
    Ok(LegSheet::from_leg(leg, resource)?.to_tsv())
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('\t', "\\t")
        .replace('\n', "\\n")
        .replace('\r', "\\r")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DatasetMeta;
    use crate::lexicon::Pos;

    const LEX: &str = "\
C 1 noun - entity
C 2 noun 1 physical object
C 3 noun 2 vehicle
C 4 noun 3 car
C 5 noun 1 abstraction
C 6 noun 5 attribute
C 7 noun 6 speed
C 8 noun 2 license plate
C 9 noun 2 plaque
C 20 noun 4 coupe
S 4 en car
S 4 it vettura|automobile
S 3 en vehicle
S 7 it velocità
S 7 ns:schema speed
S 8 it targa
S 8 en license plate|nameplate
S 9 en nameplate|plaque
S 20 it coupé
";

    fn lex() -> LexicalResource {
        LEX.parse().unwrap()
    }

    fn vettura() -> Dataset {
        let meta = DatasetMeta::parse("name = Vettura\nlanguage = it\n").unwrap();
        Dataset::from_csv(
            DatasetId::new("d2"),
            "Targa,Velocità,Tipo di corpo\nFP372MK,158,Coupé\n",
            meta,
        )
        .unwrap()
    }

    fn car() -> Dataset {
        let meta = DatasetMeta::parse("name = Car\nlanguage = en\nns.schema = ns:schema\n").unwrap();
        Dataset::from_csv(DatasetId::new("d1"), "Nameplate,schema:speed\nFP372MK,150\n", meta).unwrap()
    }

    #[test]
    fn extracts_vettura_terms() {
        let terms = extract_terms(&vettura());
        let surfaces: Vec<&str> = terms.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, ["Vettura", "Targa", "Velocità", "Tipo di corpo", "Coupé"]);
        assert_eq!(terms[3].lemma, "tipo di corpo");
        assert_eq!(terms[4].locus, Locus::Cell { row: 0, column: 2 });
    }

    #[test]
    fn namespace_header_is_one_term() {
        let terms = extract_terms(&car());
        let speed = &terms[2];
        assert_eq!(speed.surface, "schema:speed");
        assert_eq!(speed.lemma, "speed");
        assert_eq!(speed.language.as_str(), "ns:schema");
    }

    #[test]
    fn table_name_only() {
        let meta = DatasetMeta::parse("name = Empty\nlanguage = en\n").unwrap();
        let d = Dataset::from_csv(DatasetId::new("d9"), "", meta).unwrap();
        assert_eq!(extract_terms(&d).len(), 1);
    }

    #[test]
    fn wsd_single_sense_auto_and_unknown_requested() {
        let r = lex();
        let terms = extract_terms(&vettura());
        let cfg = WsdConfig::default();
        let vettura = disambiguate(&terms[0], &terms, &r, &cfg);
        assert_eq!(vettura.status, SenseStatus::Auto(ConceptId(4)));
        let tipo = disambiguate(&terms[3], &terms, &r, &cfg);
        assert_eq!(tipo.status, SenseStatus::NewConceptRequested);
        assert!(tipo.candidates.is_empty());
    }

    #[test]
    fn wsd_scores_follow_formula() {
        // nameplate: plaque (rank 0) and license plate (rank 1); context = car, speed
        let r = lex();
        let terms = extract_terms(&car());
        let d = disambiguate(&terms[1], &terms, &r, &WsdConfig::default());
        // plaque depth 3, car depth 4, lca object depth 2 -> 4/7
        let plaque = 0.7 * (4.0 / 7.0) + 0.3;
        // license plate depth 3 vs car -> 4/7 as well, rank 1
        let plate = 0.7 * (4.0 / 7.0) + 0.15;
        assert_eq!(d.candidates[0].concept, ConceptId(9));
        assert!((d.candidates[0].score - plaque).abs() < 1e-12);
        assert!((d.candidates[1].score - plate).abs() < 1e-12);
        assert_eq!(d.status, SenseStatus::Pending);
        assert_eq!(disambiguate_all(&terms, &r, &WsdConfig::default())[1], d);
    }

    #[test]
    fn resolutions() {
        let mut r = lex();
        let terms = extract_terms(&car());
        let mut d = disambiguate(&terms[1], &terms, &r, &WsdConfig::default());
        let out = apply_sense_decision(
            &mut d,
            &SenseResolution::Choose {
                concept: ConceptId(8),
                force: false,
            },
            &mut r,
            "p",
        )
        .unwrap();
        assert_eq!(out.status, SenseStatus::Confirmed(ConceptId(8)));
        assert!(!out.unchanged);
        let again = apply_sense_decision(
            &mut d,
            &SenseResolution::Choose {
                concept: ConceptId(8),
                force: false,
            },
            &mut r,
            "p",
        )
        .unwrap();
        assert!(again.unchanged);
        let not_candidate = apply_sense_decision(
            &mut d,
            &SenseResolution::Choose {
                concept: ConceptId(7),
                force: false,
            },
            &mut r,
            "p",
        );
        assert!(matches!(not_candidate, Err(LegError::NotCandidate { .. })));
        assert_eq!(d.status, SenseStatus::Confirmed(ConceptId(8)));
        let forced = apply_sense_decision(
            &mut d,
            &SenseResolution::Choose {
                concept: ConceptId(7),
                force: true,
            },
            &mut r,
            "p",
        )
        .unwrap();
        assert_eq!(forced.status, SenseStatus::Overridden(ConceptId(7)));
    }

    #[test]
    fn enrich_and_choose_creates_concept() {
        let mut r = lex();
        let terms = extract_terms(&vettura());
        let mut decisions = disambiguate_all(&terms, &r, &WsdConfig::default());
        let request = EnrichRequest::NewConcept {
            gloss: "body style of a car".into(),
            pos: Pos::Noun,
            parent: ConceptId(6),
            lemma: "tipo di corpo".into(),
            language: LanguageTag::new("it").unwrap(),
        };
        let out = apply_sense_decision(
            &mut decisions[3],
            &SenseResolution::EnrichAndChoose { request },
            &mut r,
            "p",
        )
        .unwrap();
        let fresh = out.enriched.unwrap();
        assert_eq!(out.status, SenseStatus::Overridden(fresh));
        let leg = build_leg(&decisions, &r).unwrap();
        assert!(leg.nodes.contains(&fresh));
        assert!(leg.edges.is_empty() || leg.edges.iter().all(|(c, _)| *c != fresh));
    }

    #[test]
    fn unresolved_blocks_build() {
        let r = lex();
        let terms = extract_terms(&vettura());
        let decisions = disambiguate_all(&terms, &r, &WsdConfig::default());
        match build_leg(&decisions, &r) {
            Err(LegError::Unresolved(ids)) => assert_eq!(ids, vec![DecisionId::new("s:d2.c2")]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn car_vehicle_edge() {
        let r = lex();
        let mk = |surface: &str, lang: &str, concept: u32, ds: &str| SenseDecision {
            id: DecisionId::new(format!("s:{ds}.t")),
            term: Term {
                dataset: DatasetId::new(ds),
                locus: Locus::Table,
                surface: surface.into(),
                lemma: fold_lemma(surface),
                language: LanguageTag::new(lang).unwrap(),
            },
            candidates: vec![],
            status: SenseStatus::Auto(ConceptId(concept)),
        };
        let decisions = vec![
            mk("Car", "en", 4, "d1"),
            mk("Vettura", "it", 4, "d2"),
            mk("Vehicle", "en", 3, "d3"),
            mk("Coupé", "it", 20, "d4"),
        ];
        let leg = build_leg(&decisions, &r).unwrap();
        assert_eq!(
            leg.edges,
            BTreeSet::from([(ConceptId(4), ConceptId(3)), (ConceptId(20), ConceptId(4))])
        );
        assert_eq!(leg.annotations[&ConceptId(4)].len(), 2);

        let single = build_leg(&decisions[..1], &r).unwrap();
        assert_eq!(single.nodes.len(), 1);
        assert!(single.edges.is_empty());
    }

    #[test]
    fn sheet_round_trip() {
        let r = lex();
        let terms = extract_terms(&car());
        let mut decisions = disambiguate_all(&terms, &r, &WsdConfig::default());
        decisions[1].status = SenseStatus::Confirmed(ConceptId(8));
        let leg = build_leg(&decisions, &r).unwrap();
        let tsv = export_leg_sheet(&leg, &r).unwrap();
        let parsed = LegSheet::parse(&tsv).unwrap();
        assert_eq!(parsed.to_tsv(), tsv);
        assert_eq!(parsed.to_leg(), leg);
        assert!(tsv.lines().any(|l| l.starts_with("4\tcar\t\tCar\ten\td1\ttable")));

        let empty = export_leg_sheet(&Leg::default(), &r).unwrap();
        assert_eq!(empty.lines().count(), 1);
    }

    #[test]
    fn escapes_survive() {
        let s = "a\tb\\n\nc";
        assert_eq!(unescape(&escape(s)), s);
    }
}
