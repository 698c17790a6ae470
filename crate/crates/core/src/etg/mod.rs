//! Entity Type Graph: classification of LEG concepts into etypes and
//! properties, cross-schema match suggestions, and an integrated schema whose
//! subsumption follows the concept hierarchy.

mod turtle;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::dataset::{Dataset, DatasetId};
use crate::decision::{DecisionId, ReviewStatus};
use crate::leg::{Leg, Locus};
use crate::lexicon::{ConceptId, LexicalResource, LexiconError, Pos};
use crate::text::{is_integer, is_number, parse_boolean, parse_date};

pub use turtle::{concept_iri, export_etg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Range {
    String,
    Integer,
    Decimal,
    Date,
    Boolean,
}

impl Range {
    /// Least range able to hold values of both.
    pub fn join(self, other: Range) -> Range {
        use Range::*;
        match (self, other) {
            (a, b) if a == b => a,
            (Integer, Decimal) | (Decimal, Integer) => Decimal,
            _ => String,
        }
    }

    /// Narrowest range matching every value; `String` when there is no evidence.
    pub fn infer<'a>(values: impl IntoIterator<Item = &'a str>) -> Range {
        let values: Vec<&str> = values
            .into_iter()
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            Range::String
        } else if values.iter().all(|v| is_integer(v)) {
            Range::Integer
        } else if values.iter().all(|v| is_number(v)) {
            Range::Decimal
        } else if values.iter().all(|v| parse_date(v).is_some()) {
            Range::Date
        } else if values.iter().all(|v| parse_boolean(v).is_some()) {
            Range::Boolean
        } else {
            Range::String
        }
    }

    pub fn xsd(self) -> &'static str {
        match self {
            Range::String => "xsd:string",
            Range::Integer => "xsd:integer",
            Range::Decimal => "xsd:decimal",
            Range::Date => "xsd:date",
            Range::Boolean => "xsd:boolean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PropertyKind {
    DatatypeProperty { range: Range },
    ObjectProperty { target: ConceptId },
}

impl PropertyKind {
    /// Range used to normalize cell values. Object references are kept as strings.
    pub fn value_range(&self) -> Range {
        match self {
            PropertyKind::DatatypeProperty { range } => *range,
            PropertyKind::ObjectProperty { .. } => Range::String,
        }
    }

    fn join(self, other: PropertyKind) -> PropertyKind {
        use PropertyKind::*;
        match (self, other) {
            (DatatypeProperty { range: a }, DatatypeProperty { range: b }) => DatatypeProperty { range: a.join(b) },
            (ObjectProperty { target: a }, ObjectProperty { target: b }) if a == b => self,
            _ => DatatypeProperty { range: Range::String },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnClassification {
    pub index: usize,
    pub concept: ConceptId,
    pub kind: PropertyKind,
    pub identifying: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementClassification {
    pub dataset: DatasetId,
    pub table_concept: ConceptId,
    pub columns: Vec<ColumnClassification>,
}

impl ElementClassification {
    pub fn concept_of(&self, element: Element) -> Option<ConceptId> {
        match element {
            Element::Table => Some(self.table_concept),
            Element::Column(i) => self.columns.iter().find(|c| c.index == i).map(|c| c.concept),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    Table,
    Column(usize),
}

impl Element {
    pub fn locus(self) -> Locus {
        match self {
            Element::Table => Locus::Table,
            Element::Column(index) => Locus::Column { index },
        }
    }

    fn fragment(self) -> String {
        match self {
            Element::Table => "t".into(),
            Element::Column(i) => format!("c{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ElementRef {
    pub dataset: DatasetId,
    pub element: Element,
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.dataset, self.element.fragment())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub id: DecisionId,
    pub left: ElementRef,
    pub right: ElementRef,
    pub similarity: f64,
    pub status: ReviewStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EtypeId(pub u32);

impl fmt::Display for EtypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropertyId(pub u32);

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Etype {
    pub concept: ConceptId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Property {
    pub concept: ConceptId,
    pub name: String,
    pub kind: PropertyKind,
    pub domain: EtypeId,
    pub identifying: bool,
    /// Dataset columns this property integrates.
    pub sources: Vec<ElementRef>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Etg {
    pub etypes: BTreeMap<EtypeId, Etype>,
    pub properties: BTreeMap<PropertyId, Property>,
    /// `(child, parent)`, transitively reduced.
    pub subsumption: BTreeSet<(EtypeId, EtypeId)>,
    pub dataset_etypes: BTreeMap<DatasetId, EtypeId>,
    /// `(project etype, reference concept)` subclass links from accepted
    /// reference-ontology matches.
    #[serde(default)]
    pub reference_parents: BTreeSet<(EtypeId, ConceptId)>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Etg {
    pub fn etype_by_concept(&self, concept: ConceptId) -> Option<EtypeId> {
        self.etypes
            .iter()
            .find(|(_, e)| e.concept == concept)
            .map(|(id, _)| *id)
    }

    pub fn property_for(&self, dataset: &DatasetId, column: usize) -> Option<PropertyId> {
        let target = ElementRef {
            dataset: dataset.clone(),
            element: Element::Column(column),
        };
        self.properties
            .iter()
            .find(|(_, p)| p.sources.contains(&target))
            .map(|(id, _)| *id)
    }

    /// Reflexive ETG ancestors of an etype.
    pub fn etype_ancestors(&self, etype: EtypeId) -> BTreeSet<EtypeId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![etype];
        while let Some(e) = stack.pop() {
            if seen.insert(e) {
                stack.extend(self.subsumption.iter().filter(|(c, _)| *c == e).map(|(_, p)| *p));
            }
        }
        seen
    }

    pub fn concepts(&self) -> BTreeSet<ConceptId> {
        self.etypes
            .values()
            .map(|e| e.concept)
            .chain(self.properties.values().map(|p| p.concept))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum EtgError {
    #[error("LEG has no concept for {0}")]
    MissingCoverage(ElementRef),
    #[error("table concept {concept} of dataset {dataset} is not a noun")]
    NotANoun { dataset: DatasetId, concept: ConceptId },
    #[error("unresolved match suggestions: {}", .0.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(", "))]
    Unresolved(Vec<DecisionId>),
    #[error("accepted match {left} ~ {right} joins incomparable concepts {left_concept} and {right_concept}")]
    Incoherent {
        left: ElementRef,
        right: ElementRef,
        left_concept: ConceptId,
        right_concept: ConceptId,
    },
    #[error("ETG fails coherence checks: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Violations(Vec<Violation>),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

/// Classifies table names as etype candidates and columns as properties.
/// Column kinds come from the values: integers, decimals, dates, booleans,
/// or strings; a column whose concept falls under another table's etype is
/// an object property. Columns are identifying when their values are unique
/// and their concept is configured as identifying (or the dataset metadata
/// says so).
pub fn classify_elements(
    leg: &Leg,
    datasets: &[Dataset],
    resource: &LexicalResource,
    cfg: &Config,
) -> Result<Vec<ElementClassification>, EtgError> {
    let index = leg.locus_index();
    let concept_at = |dataset: &Dataset, element: Element| -> Result<ConceptId, EtgError> {
        index
            .get(&(dataset.id.clone(), element.locus()))
            .copied()
            .ok_or_else(|| {
                EtgError::MissingCoverage(ElementRef {
                    dataset: dataset.id.clone(),
                    element,
                })
            })
    };

    let mut tables = BTreeMap::new();
    for d in datasets {
        let concept = concept_at(d, Element::Table)?;
        if resource.concept(concept)?.pos != Pos::Noun {
            return Err(EtgError::NotANoun {
                dataset: d.id.clone(),
                concept,
            });
        }
        tables.insert(d.id.clone(), concept);
    }

    let mut out = Vec::new();
    for d in datasets {
        let own = tables[&d.id];
        let mut columns = Vec::new();
        for index in 0..d.columns.len() {
            let concept = concept_at(d, Element::Column(index))?;
            let values: Vec<&str> = d.rows.iter().map(|r| r[index].as_str()).collect();
            let range = Range::infer(values.iter().copied());
            let target = object_target(concept, own, &tables, resource)?;
            let kind = match target {
                Some(target) if range == Range::String => PropertyKind::ObjectProperty { target },
                _ => PropertyKind::DatatypeProperty { range },
            };
            let non_empty: Vec<&str> = values.iter().map(|v| v.trim()).filter(|v| !v.is_empty()).collect();
            let unique = non_empty.iter().collect::<BTreeSet<_>>().len() == non_empty.len();
            let configured = d
                .identifying
                .get(&index)
                .copied()
                .unwrap_or_else(|| cfg.identifying.contains(&concept));
            columns.push(ColumnClassification {
                index,
                concept,
                kind,
                identifying: unique && configured,
            });
        }
        out.push(ElementClassification {
            dataset: d.id.clone(),
            table_concept: own,
            columns,
        });
    }
    Ok(out)
}

fn object_target(
    concept: ConceptId,
    own_table: ConceptId,
    tables: &BTreeMap<DatasetId, ConceptId>,
    resource: &LexicalResource,
) -> Result<Option<ConceptId>, LexiconError> {
    let mut best: Option<(u32, ConceptId)> = None;
    for &t in tables.values().collect::<BTreeSet<_>>() {
        if t == own_table || resource.concept(t)?.pos != resource.concept(concept)?.pos {
            continue;
        }
        if resource.is_ancestor(t, concept)? {
            let depth = resource.depth(t)?;
            // deepest wins, ties to the smallest id
            if best.is_none_or(|(d, id)| depth > d || (depth == d && t < id)) {
                best = Some((depth, t));
            }
        }
    }
    Ok(best.map(|(_, t)| t))
}

fn match_id(left: &ElementRef, right: &ElementRef) -> DecisionId {
    DecisionId(format!("m:{left}~{right}"))
}

/// Orders suggestions by descending similarity, ties by element position.
pub fn rank_matches(matches: &mut [MatchCandidate]) {
    matches.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| (&a.left, &a.right).cmp(&(&b.left, &b.right)))
    });
}

/// Pairs every etype candidate and every property across datasets. Identical
/// concepts are accepted outright; other pairs become suggestions when their
/// concept similarity reaches `floor`.
pub fn suggest_matches(
    classifications: &[ElementClassification],
    resource: &LexicalResource,
    floor: f64,
) -> Result<Vec<MatchCandidate>, EtgError> {
    let mut sorted: Vec<&ElementClassification> = classifications.iter().collect();
    sorted.sort_by(|a, b| a.dataset.cmp(&b.dataset));
    let elements = |c: &ElementClassification| -> Vec<(Element, ConceptId)> {
        std::iter::once((Element::Table, c.table_concept))
            .chain(c.columns.iter().map(|col| (Element::Column(col.index), col.concept)))
            .collect()
    };
    let mut out = Vec::new();
    for (i, left) in sorted.iter().enumerate() {
        for right in &sorted[i + 1..] {
            if left.dataset == right.dataset {
                continue;
            }
            for (le, lc) in elements(left) {
                for (re, rc) in elements(right) {
                    if matches!(le, Element::Table) != matches!(re, Element::Table) {
                        continue;
                    }
                    if resource.concept(lc)?.pos != resource.concept(rc)?.pos {
                        continue;
                    }
                    let similarity = resource.concept_similarity(lc, rc)?;
                    let status = if lc == rc {
                        ReviewStatus::Accepted
                    } else if similarity >= floor {
                        ReviewStatus::Suggested
                    } else {
                        continue;
                    };
                    let l = ElementRef {
                        dataset: left.dataset.clone(),
                        element: le,
                    };
                    let r = ElementRef {
                        dataset: right.dataset.clone(),
                        element: re,
                    };
                    out.push(MatchCandidate {
                        id: match_id(&l, &r),
                        left: l,
                        right: r,
                        similarity,
                        status,
                    });
                }
            }
        }
    }
    rank_matches(&mut out);
    Ok(out)
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index becomes the representative
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Builds the integrated schema. One etype per distinct table concept;
/// subsumption is the cover relation of the lexicon order among etype
/// concepts, so comparable etypes are linked even without an explicit match.
/// Accepted property matches merge columns into one property whose domain is
/// the most specific etype subsuming every source table.
pub fn build_etg(
    classifications: &[ElementClassification],
    matches: &[MatchCandidate],
    leg: &Leg,
    resource: &LexicalResource,
) -> Result<Etg, EtgError> {
    let unresolved: Vec<DecisionId> = matches
        .iter()
        .filter(|m| m.status == ReviewStatus::Suggested)
        .map(|m| m.id.clone())
        .collect();
    if !unresolved.is_empty() {
        return Err(EtgError::Unresolved(unresolved));
    }
    let by_dataset: BTreeMap<&DatasetId, &ElementClassification> =
        classifications.iter().map(|c| (&c.dataset, c)).collect();
    let concept_of = |r: &ElementRef| -> Result<ConceptId, EtgError> {
        by_dataset
            .get(&r.dataset)
            .and_then(|c| c.concept_of(r.element))
            .ok_or_else(|| EtgError::MissingCoverage(r.clone()))
    };

    let mut etg = Etg::default();
    let table_concepts: BTreeSet<ConceptId> = classifications.iter().map(|c| c.table_concept).collect();
    for (i, &concept) in table_concepts.iter().enumerate() {
        let name = leg.label_for(concept, None).unwrap_or_default().to_string();
        etg.etypes.insert(EtypeId(i as u32), Etype { concept, name });
    }
    let etype_of_concept: BTreeMap<ConceptId, EtypeId> =
        etg.etypes.iter().map(|(id, e)| (e.concept, *id)).collect();
    for c in classifications {
        etg.dataset_etypes
            .insert(c.dataset.clone(), etype_of_concept[&c.table_concept]);
    }

    let accepted: Vec<&MatchCandidate> = matches
        .iter()
        .filter(|m| m.status == ReviewStatus::Accepted)
        .collect();
    for m in accepted.iter().filter(|m| m.left.element == Element::Table) {
        let (lc, rc) = (concept_of(&m.left)?, concept_of(&m.right)?);
        if !resource.comparable(lc, rc)? {
            return Err(EtgError::Incoherent {
                left: m.left.clone(),
                right: m.right.clone(),
                left_concept: lc,
                right_concept: rc,
            });
        }
    }
    for (child, parent) in resource.cover_edges(&table_concepts)? {
        etg.subsumption
            .insert((etype_of_concept[&child], etype_of_concept[&parent]));
    }

    // property components over accepted column matches
    let columns: Vec<(ElementRef, &ColumnClassification)> = classifications
        .iter()
        .flat_map(|c| {
            c.columns.iter().map(move |col| {
                (
                    ElementRef {
                        dataset: c.dataset.clone(),
                        element: Element::Column(col.index),
                    },
                    col,
                )
            })
        })
        .collect();
    let mut sorted_columns = columns.clone();
    sorted_columns.sort_by(|a, b| a.0.cmp(&b.0));
    let position: BTreeMap<&ElementRef, usize> = sorted_columns
        .iter()
        .enumerate()
        .map(|(i, (r, _))| (r, i))
        .collect();
    let mut sets = DisjointSet::new(sorted_columns.len());
    for m in accepted.iter().filter(|m| m.left.element != Element::Table) {
        let (Some(&a), Some(&b)) = (position.get(&m.left), position.get(&m.right)) else {
            return Err(EtgError::MissingCoverage(m.left.clone()));
        };
        sets.union(a, b);
    }
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..sorted_columns.len() {
        components.entry(sets.find(i)).or_default().push(i);
    }

    let mut next_property = 0u32;
    for members in components.values() {
        let member_cols: Vec<&(ElementRef, &ColumnClassification)> =
            members.iter().map(|&i| &sorted_columns[i]).collect();
        let concepts: BTreeSet<ConceptId> = member_cols.iter().map(|(_, c)| c.concept).collect();
        let mut general = None;
        for &c in &concepts {
            let mut covers_all = true;
            for &o in &concepts {
                if !resource.is_ancestor(c, o)? {
                    covers_all = false;
                    break;
                }
            }
            if covers_all {
                general = Some(c);
                break;
            }
        }
        let Some(concept) = general else {
            let (a, b) = incomparable_pair(&member_cols, resource)?;
            return Err(EtgError::Incoherent {
                left: a.0.clone(),
                right: b.0.clone(),
                left_concept: a.1.concept,
                right_concept: b.1.concept,
            });
        };
        let kind = member_cols
            .iter()
            .map(|(_, c)| c.kind)
            .reduce(PropertyKind::join)
            .expect("component is nonempty");
        let identifying = member_cols.iter().any(|(_, c)| c.identifying);
        let first = &member_cols[0].0;
        let name = leg
            .label_at(&first.dataset, first.element.locus())
            .unwrap_or_default()
            .to_string();
        let member_etypes: BTreeSet<EtypeId> = member_cols
            .iter()
            .map(|(r, _)| etg.dataset_etypes[&r.dataset])
            .collect();

        let groups: Vec<(EtypeId, Vec<ElementRef>)> =
            match least_common_subsumer(&etg, &member_etypes, resource)? {
                Some(domain) => vec![(domain, member_cols.iter().map(|(r, _)| r.clone()).collect())],
                None => {
                    etg.warnings.push(format!(
                        "property '{name}' (concept {concept}) has no common domain; duplicated per etype"
                    ));
                    member_etypes
                        .iter()
                        .map(|e| {
                            let refs = member_cols
                                .iter()
                                .filter(|(r, _)| etg.dataset_etypes[&r.dataset] == *e)
                                .map(|(r, _)| r.clone())
                                .collect();
                            (*e, refs)
                        })
                        .collect()
                }
            };
        for (domain, sources) in groups {
            etg.properties.insert(
                PropertyId(next_property),
                Property {
                    concept,
                    name: name.clone(),
                    kind,
                    domain,
                    identifying,
                    sources,
                },
            );
            next_property += 1;
        }
    }
    Ok(etg)
}

type ColumnAt<'a> = (ElementRef, &'a ColumnClassification);

fn incomparable_pair<'a>(
    cols: &[&'a ColumnAt<'a>],
    resource: &LexicalResource,
) -> Result<(&'a ColumnAt<'a>, &'a ColumnAt<'a>), LexiconError> {
    for (i, a) in cols.iter().enumerate() {
        for b in &cols[i + 1..] {
            if !resource.comparable(a.1.concept, b.1.concept)? {
                return Ok((a, b));
            }
        }
    }
    // chains of comparable pairs without a single top
    Ok((cols[0], cols[cols.len() - 1]))
}

/// Most specific etype whose concept subsumes every etype in `members`.
fn least_common_subsumer(
    etg: &Etg,
    members: &BTreeSet<EtypeId>,
    resource: &LexicalResource,
) -> Result<Option<EtypeId>, LexiconError> {
    let mut common = Vec::new();
    for (id, e) in &etg.etypes {
        let mut all = true;
        for m in members {
            if !resource.is_ancestor(e.concept, etg.etypes[m].concept)? {
                all = false;
                break;
            }
        }
        if all {
            common.push((*id, e.concept));
        }
    }
    let mut best: Option<(EtypeId, ConceptId, u32)> = None;
    for (id, c) in common {
        let depth = resource.depth(c)?;
        if best.is_none_or(|(_, bc, bd)| depth > bd || (depth == bd && c < bc)) {
            best = Some((id, c, depth));
        }
    }
    Ok(best.map(|(id, _, _)| id))
}

/// Pairs each project etype with each etype of a reference schema. Accepted
/// pairs only add subclass links from the project etype to the reference
/// concept, so only reference concepts that subsume the project concept are
/// proposed.
pub fn suggest_reference_matches(
    etg: &Etg,
    reference: &Etg,
    resource: &LexicalResource,
    floor: f64,
) -> Result<Vec<MatchCandidate>, EtgError> {
    let mut out = Vec::new();
    for e in etg.etypes.values() {
        for r in reference.etypes.values() {
            if !resource.contains(r.concept)
                || resource.concept(r.concept)?.pos != resource.concept(e.concept)?.pos
                || !resource.is_ancestor(r.concept, e.concept)?
            {
                continue;
            }
            let similarity = resource.concept_similarity(e.concept, r.concept)?;
            let status = if e.concept == r.concept {
                ReviewStatus::Accepted
            } else if similarity >= floor {
                ReviewStatus::Suggested
            } else {
                continue;
            };
            let left = ElementRef {
                dataset: DatasetId::new(format!("etg:{}", e.concept)),
                element: Element::Table,
            };
            let right = ElementRef {
                dataset: DatasetId::new(format!("ref:{}", r.concept)),
                element: Element::Table,
            };
            out.push(MatchCandidate {
                id: DecisionId(format!("m:etg.{}~ref.{}", e.concept, r.concept)),
                left,
                right,
                similarity,
                status,
            });
        }
    }
    rank_matches(&mut out);
    Ok(out)
}

/// Records accepted reference matches as subclass links.
pub fn apply_reference_matches(etg: &mut Etg, matches: &[MatchCandidate]) -> Result<(), EtgError> {
    etg.reference_parents.clear();
    for m in matches.iter().filter(|m| m.status == ReviewStatus::Accepted) {
        let parse = |r: &ElementRef, prefix: &str| -> Option<ConceptId> {
            r.dataset.as_str().strip_prefix(prefix)?.parse().ok()
        };
        let (Some(own), Some(reference)) = (parse(&m.left, "etg:"), parse(&m.right, "ref:")) else {
            continue;
        };
        if let Some(etype) = etg.etype_by_concept(own) {
            etg.reference_parents.insert((etype, reference));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum Violation {
    /// The parent's concept lies below the child's in the lexicon.
    InvertedSubsumption { child: EtypeId, parent: EtypeId },
    IncomparableSubsumption { child: EtypeId, parent: EtypeId },
    NotInLeg { element: String, concept: ConceptId },
    SubsumptionCycle { etypes: Vec<EtypeId> },
    DuplicateEtypeConcept { concept: ConceptId, etypes: Vec<EtypeId> },
    UnknownEtype { etype: EtypeId },
    IncoherentReference { etype: EtypeId, reference: ConceptId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvertedSubsumption { child, parent } => {
                write!(f, "subsumption {child} ⊑ {parent} inverts the concept hierarchy")
            }
            Violation::IncomparableSubsumption { child, parent } => {
                write!(f, "subsumption {child} ⊑ {parent} links incomparable concepts")
            }
            Violation::NotInLeg { element, concept } => {
                write!(f, "{element} uses concept {concept} which is not in the LEG")
            }
            Violation::SubsumptionCycle { etypes } => write!(
                f,
                "subsumption cycle through {}",
                etypes.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
            ),
            Violation::DuplicateEtypeConcept { concept, etypes } => write!(
                f,
                "concept {concept} grounds several etypes: {}",
                etypes.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
            ),
            Violation::UnknownEtype { etype } => write!(f, "reference to missing etype {etype}"),
            Violation::IncoherentReference { etype, reference } => {
                write!(f, "{etype} cannot be a subclass of reference concept {reference}")
            }
        }
    }
}

/// Independent coherence checker: every subsumption edge must follow the
/// lexicon hierarchy, every concept must be a LEG node, subsumption must be
/// acyclic, and no concept may ground two etypes.
pub fn check_coherence(etg: &Etg, leg: &Leg, resource: &LexicalResource) -> Vec<Violation> {
    let mut out = Vec::new();
    for (id, e) in &etg.etypes {
        if !leg.nodes.contains(&e.concept) {
            out.push(Violation::NotInLeg {
                element: format!("etype {id}"),
                concept: e.concept,
            });
        }
    }
    for (id, p) in &etg.properties {
        if !leg.nodes.contains(&p.concept) {
            out.push(Violation::NotInLeg {
                element: format!("property {id}"),
                concept: p.concept,
            });
        }
        if !etg.etypes.contains_key(&p.domain) {
            out.push(Violation::UnknownEtype { etype: p.domain });
        }
    }
    let mut by_concept: BTreeMap<ConceptId, Vec<EtypeId>> = BTreeMap::new();
    for (id, e) in &etg.etypes {
        by_concept.entry(e.concept).or_default().push(*id);
    }
    for (concept, etypes) in by_concept {
        if etypes.len() > 1 {
            out.push(Violation::DuplicateEtypeConcept { concept, etypes });
        }
    }
    for &(child, parent) in &etg.subsumption {
        let (Some(c), Some(p)) = (etg.etypes.get(&child), etg.etypes.get(&parent)) else {
            let missing = if etg.etypes.contains_key(&child) { parent } else { child };
            out.push(Violation::UnknownEtype { etype: missing });
            continue;
        };
        match resource.is_ancestor(p.concept, c.concept) {
            Ok(true) => {}
            Ok(false) if resource.is_ancestor(c.concept, p.concept).unwrap_or(false) => {
                out.push(Violation::InvertedSubsumption { child, parent })
            }
            _ => out.push(Violation::IncomparableSubsumption { child, parent }),
        }
    }
    for &(etype, reference) in &etg.reference_parents {
        let ok = etg
            .etypes
            .get(&etype)
            .map(|e| resource.is_ancestor(reference, e.concept).unwrap_or(false))
            .unwrap_or(false);
        if !ok {
            out.push(Violation::IncoherentReference { etype, reference });
        }
    }
    if let Some(cycle) = subsumption_cycle(&etg.subsumption) {
        out.push(Violation::SubsumptionCycle { etypes: cycle });
    }
    out
}

fn subsumption_cycle(edges: &BTreeSet<(EtypeId, EtypeId)>) -> Option<Vec<EtypeId>> {
    let mut adj: BTreeMap<EtypeId, Vec<EtypeId>> = BTreeMap::new();
    for &(c, p) in edges {
        adj.entry(c).or_default().push(p);
        adj.entry(p).or_default();
    }
    // Kahn: whatever cannot be peeled off lies on or behind a cycle
    let mut indegree: BTreeMap<EtypeId, usize> = adj.keys().map(|k| (*k, 0)).collect();
    for ps in adj.values() {
        for p in ps {
            *indegree.get_mut(p).unwrap() += 1;
        }
    }
    let mut ready: Vec<EtypeId> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
    while let Some(n) = ready.pop() {
        for p in &adj[&n] {
            let d = indegree.get_mut(p).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(*p);
            }
        }
        indegree.remove(&n);
    }
    if indegree.is_empty() {
        None
    } else {
        Some(indegree.into_keys().collect())
    }
}
