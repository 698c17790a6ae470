//! Entity Graph: one entity candidate per dataset row, merge suggestions by
//! identifying values or value overlap, and assembly into entities with
//! fresh ids, retained conflicts, and per-value provenance.

mod jsonld;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::config::Config;
use crate::dataset::{Dataset, DatasetId};
use crate::decision::{DecisionId, ReviewStatus};
use crate::etg::{Etg, EtypeId, PropertyId, Range};
use crate::lexicon::{ConceptId, LexicalResource, LexiconError};
use crate::text::{is_integer, is_number, normalize_cell, parse_boolean, parse_date};

pub use jsonld::{export_jsonld, import_jsonld};
pub use render::{render_eg, Label, RenderedEg, RenderedEntity, RenderedValue};

/// A typed cell value. Decimals keep their scale, so `155.0` prints as
/// written while still comparing equal to `155`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    String(String),
    Integer(i64),
    Decimal(Decimal),
    Date(NaiveDate),
    Boolean(bool),
}

impl Value {
    pub fn range(&self) -> Range {
        match self {
            Value::String(_) => Range::String,
            Value::Integer(_) => Range::Integer,
            Value::Decimal(_) => Range::Decimal,
            Value::Date(_) => Range::Date,
            Value::Boolean(_) => Range::Boolean,
        }
    }

    /// Form used to decide whether two values are the same: numbers compare
    /// numerically, strings case-insensitively.
    pub fn comparison_key(&self) -> String {
        match self {
            Value::String(s) => format!("s:{}", s.to_lowercase()),
            Value::Integer(i) => format!("n:{}", Decimal::from(*i).normalize()),
            Value::Decimal(d) => format!("n:{}", d.normalize()),
            Value::Date(d) => format!("d:{d}"),
            Value::Boolean(b) => format!("b:{b}"),
        }
    }

    /// Parses the lexical form written by `Display` for the given range.
    pub fn parse_as(lexical: &str, range: Range) -> Result<Value, NormalizeError> {
        normalize_value(lexical, range)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::String(s) => f.write_str(s),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Decimal(d) => write!(f, "{d}"),
            Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Value::Boolean(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ValueRepr {
    #[serde(rename = "type")]
    range: Range,
    value: String,
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ValueRepr {
            range: self.range(),
            value: self.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = ValueRepr::deserialize(d)?;
        normalize_value(&repr.value, repr.range).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot read {raw:?} as {range:?}")]
pub struct NormalizeError {
    pub raw: String,
    pub range: Range,
}

/// Trims and NFC-normalizes, then parses according to `range`. Numbers use
/// `.` as decimal separator; dates are ISO `yyyy-mm-dd` or `dd/mm/yyyy`.
pub fn normalize_value(raw: &str, range: Range) -> Result<Value, NormalizeError> {
    let s = normalize_cell(raw);
    let fail = || NormalizeError {
        raw: raw.to_string(),
        range,
    };
    match range {
        Range::String => Ok(Value::String(s)),
        Range::Integer if is_integer(&s) => s.parse().map(Value::Integer).map_err(|_| fail()),
        Range::Decimal if is_number(&s) => Decimal::from_str(&s).map(Value::Decimal).map_err(|_| fail()),
        Range::Date => parse_date(&s).map(Value::Date).ok_or_else(fail),
        Range::Boolean => parse_boolean(&s).map(Value::Boolean).ok_or_else(fail),
        _ => Err(fail()),
    }
}


/// Where a value was read: dataset, row and column, all zero-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: DatasetId,
    pub row: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyValue {
    pub property: PropertyId,
    /// The cell as written in the first source.
    pub raw: String,
    /// `None` when the cell does not fit the property's range.
    pub normalized: Option<Value>,
    /// Sorted, never empty.
    pub provenance: Vec<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl PropertyValue {
    /// Values that collapse into one carry the same key.
    pub fn comparison_key(&self) -> String {
        match &self.normalized {
            Some(v) => v.comparison_key(),
            None => format!("r:{}", self.raw),
        }
    }
}

/// A dataset row, the unit of entity detection.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowRef {
    pub dataset: DatasetId,
    pub row: usize,
}

impl fmt::Display for RowRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.r{}", self.dataset, self.row)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCandidate {
    pub dataset: DatasetId,
    pub row: usize,
    pub etype: EtypeId,
    pub values: Vec<PropertyValue>,
}

impl EntityCandidate {
    pub fn row_ref(&self) -> RowRef {
        RowRef {
            dataset: self.dataset.clone(),
            row: self.row,
        }
    }
}

#[derive(Debug, Error)]
pub enum EgError {
    #[error("dataset {0} has no etype in the ETG")]
    UnclassifiedDataset(DatasetId),
    #[error("unresolved merge suggestions: {}", join(.0))]
    Unresolved(Vec<DecisionId>),
    #[error("merged rows {} have incomparable etypes {}", join(.members), join(.etypes))]
    IncomparableEtypes { members: Vec<RowRef>, etypes: Vec<EtypeId> },
    #[error("etype {etype} is not an ancestor of {current} for entity of {member}")]
    BadReseat {
        member: RowRef,
        etype: EtypeId,
        current: EtypeId,
    },
    #[error("unknown etype {0}")]
    UnknownEtype(EtypeId),
    #[error("language {0} has no lexemes")]
    UnsupportedLanguage(String),
    #[error("JSON-LD: {0}")]
    JsonLd(String),
    #[error("fresh id {0} collides with an existing id or input cell")]
    IdCollision(EntityId),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// One candidate per row. Every non-empty cell becomes a value of the
/// property the ETG integrates its column into; cells that do not parse
/// under the property's range are kept raw with a warning.
pub fn detect_entities(dataset: &Dataset, etg: &Etg) -> Result<Vec<EntityCandidate>, EgError> {
    let etype = *etg
        .dataset_etypes
        .get(&dataset.id)
        .ok_or_else(|| EgError::UnclassifiedDataset(dataset.id.clone()))?;
    let properties: Vec<Option<(PropertyId, Range)>> = (0..dataset.columns.len())
        .map(|c| {
            etg.property_for(&dataset.id, c)
                .map(|p| (p, etg.properties[&p].kind.value_range()))
        })
        .collect();
    let mut out = Vec::with_capacity(dataset.rows.len());
    for (row, cells) in dataset.rows.iter().enumerate() {
        let mut values = Vec::new();
        for (column, raw) in cells.iter().enumerate() {
            let Some((property, range)) = properties[column] else {
                continue;
            };
            if raw.trim().is_empty() {
                continue;
            }
            let (normalized, warning) = match normalize_value(raw, range) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            values.push(PropertyValue {
                property,
                raw: raw.clone(),
                normalized,
                provenance: vec![Provenance {
                    dataset: dataset.id.clone(),
                    row,
                    column,
                }],
                warning,
            });
        }
        out.push(EntityCandidate {
            dataset: dataset.id.clone(),
            row,
            etype,
            values,
        });
    }
    Ok(out)
}

/// The most specific of `etypes` under the lexicon order, or `None` when two
/// of them are incomparable.
pub fn recognize_etype(
    etypes: &BTreeSet<EtypeId>,
    etg: &Etg,
    resource: &LexicalResource,
) -> Result<Option<EtypeId>, EgError> {
    let concept = |e: &EtypeId| -> Result<ConceptId, EgError> {
        etg.etypes
            .get(e)
            .map(|t| t.concept)
            .ok_or(EgError::UnknownEtype(*e))
    };
    let mut best: Option<EtypeId> = None;
    for e in etypes {
        let c = concept(e)?;
        best = match best {
            None => Some(*e),
            Some(b) => {
                let bc = concept(&b)?;
                if resource.is_ancestor(bc, c)? {
                    Some(*e)
                } else if resource.is_ancestor(c, bc)? {
                    Some(b)
                } else {
                    return Ok(None);
                }
            }
        };
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "evidence", rename_all = "kebab-case")]
pub enum MergeEvidence {
    /// Both rows carry this value on identifying properties.
    Identifying { property: PropertyId, value: String },
    /// Share of shared properties with equal values.
    Similarity { score: f64, shared: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeCandidate {
    pub id: DecisionId,
    pub left: RowRef,
    pub right: RowRef,
    pub evidence: MergeEvidence,
    pub status: ReviewStatus,
}

fn merge_id(left: &RowRef, right: &RowRef) -> DecisionId {
    DecisionId(format!("g:{left}~{right}"))
}

pub(crate) struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
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

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Blocks candidates on the normalized values of identifying properties:
/// rows sharing such a value are linked to the first earlier row of the block
/// with a comparable etype, and those merges are accepted outright. Remaining
/// pairs whose shared properties mostly agree are suggested for review.
pub fn suggest_merges(
    candidates: &[EntityCandidate],
    etg: &Etg,
    resource: &LexicalResource,
    cfg: &Config,
) -> Result<Vec<MergeCandidate>, EgError> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by_key(|&i| candidates[i].row_ref());
    let mut comparable = BTreeMap::new();
    let mut is_comparable = |a: EtypeId, b: EtypeId| -> Result<bool, EgError> {
        let key = (a.min(b), a.max(b));
        if let Some(&v) = comparable.get(&key) {
            return Ok(v);
        }
        let (ca, cb) = (etg.etypes[&a].concept, etg.etypes[&b].concept);
        let v = resource.comparable(ca, cb)?;
        comparable.insert(key, v);
        Ok(v)
    };

    let mut blocks: BTreeMap<String, Vec<(usize, PropertyId)>> = BTreeMap::new();
    for &i in &order {
        for v in &candidates[i].values {
            let identifying = etg.properties.get(&v.property).is_some_and(|p| p.identifying);
            if identifying && v.normalized.is_some() {
                let block = blocks.entry(v.comparison_key()).or_default();
                if block.last().map(|(j, _)| *j) != Some(i) {
                    block.push((i, v.property));
                }
            }
        }
    }

    let mut out = Vec::new();
    let mut sets = DisjointSet::new(candidates.len());
    for members in blocks.values() {
        for (k, &(i, _)) in members.iter().enumerate().skip(1) {
            for &(j, property) in &members[..k] {
                let (a, b) = (&candidates[j], &candidates[i]);
                if !is_comparable(a.etype, b.etype)? {
                    continue;
                }
                if sets.union(j, i) {
                    let value = a
                        .values
                        .iter()
                        .find(|v| v.property == property)
                        .and_then(|v| v.normalized.as_ref())
                        .map(ToString::to_string)
                        .unwrap_or_default();
                    out.push(MergeCandidate {
                        id: merge_id(&a.row_ref(), &b.row_ref()),
                        left: a.row_ref(),
                        right: b.row_ref(),
                        evidence: MergeEvidence::Identifying { property, value },
                        status: ReviewStatus::Accepted,
                    });
                }
                break;
            }
        }
    }

    let keyed: Vec<BTreeMap<PropertyId, BTreeSet<String>>> = candidates
        .iter()
        .map(|c| {
            let mut m: BTreeMap<PropertyId, BTreeSet<String>> = BTreeMap::new();
            for v in &c.values {
                m.entry(v.property).or_default().insert(v.comparison_key());
            }
            m
        })
        .collect();
    for (x, &i) in order.iter().enumerate() {
        for &j in &order[x + 1..] {
            if sets.find(i) == sets.find(j) {
                continue;
            }
            let (a, b) = (&candidates[i], &candidates[j]);
            let shared: Vec<PropertyId> = keyed[i].keys().filter(|p| keyed[j].contains_key(p)).copied().collect();
            if shared.len() < cfg.merge_min_shared.max(1) {
                continue;
            }
            let agrees = |p: &PropertyId| !keyed[i][p].is_disjoint(&keyed[j][p]);
            // different keys mean different entities
            if shared.iter().any(|p| etg.properties[p].identifying && !agrees(p)) {
                continue;
            }
            let equal = shared.iter().filter(|p| agrees(p)).count();
            let score = equal as f64 / shared.len() as f64;
            if score >= cfg.merge_floor && is_comparable(a.etype, b.etype)? {
                out.push(MergeCandidate {
                    id: merge_id(&a.row_ref(), &b.row_ref()),
                    left: a.row_ref(),
                    right: b.row_ref(),
                    evidence: MergeEvidence::Similarity {
                        score,
                        shared: shared.len(),
                    },
                    status: ReviewStatus::Suggested,
                });
            }
        }
    }
    Ok(out)
}

/// System id of an entity, shown as `#<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl FromStr for EntityId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('#')
            .filter(|n| !n.starts_with('0'))
            .and_then(|n| n.parse().ok())
            .map(EntityId)
            .ok_or_else(|| format!("bad entity id {s:?}"))
    }
}

impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub etype: EtypeId,
    /// Rows this entity was assembled from, sorted.
    pub members: Vec<RowRef>,
    /// Sorted by property, then provenance. Distinct values of one property
    /// sit side by side.
    pub values: Vec<PropertyValue>,
}

impl Entity {
    pub fn values_of(&self, property: PropertyId) -> impl Iterator<Item = &PropertyValue> {
        self.values.iter().filter(move |v| v.property == property)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Eg {
    #[serde(with = "entity_map")]
    pub entities: BTreeMap<EntityId, Entity>,
    /// Next id to try; ids are never handed out twice.
    pub next_id: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

mod entity_map {
    use super::{Entity, EntityId};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<EntityId, Entity>, s: S) -> Result<S::Ok, S::Error> {
        m.values().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<EntityId, Entity>, D::Error> {
        Ok(Vec::<Entity>::deserialize(d)?.into_iter().map(|e| (e.id, e)).collect())
    }
}

/// Every `n` such that `#n` occurs somewhere inside an input cell.
pub fn reserved_ids<'a>(cells: impl IntoIterator<Item = &'a str>) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    for cell in cells {
        let bytes = cell.as_bytes();
        for (i, _) in cell.match_indices('#') {
            let digits: &[u8] = &bytes[i + 1..];
            let len = digits.iter().take_while(|b| b.is_ascii_digit()).count();
            if len == 0 || digits[0] == b'0' {
                continue;
            }
            // every prefix "#d1..dj" is a substring too
            let mut n: u64 = 0;
            for &b in &digits[..len] {
                match n.checked_mul(10).and_then(|m| m.checked_add(u64::from(b - b'0'))) {
                    Some(m) => {
                        n = m;
                        out.insert(n);
                    }
                    None => break,
                }
            }
        }
    }
    out
}

/// Inputs to [`assemble_eg`].
pub struct Assembly<'a> {
    pub candidates: &'a [EntityCandidate],
    pub merges: &'a [MergeCandidate],
    /// Requested etype per entity, keyed by the entity's first member row.
    pub reseats: &'a BTreeMap<RowRef, EtypeId>,
    /// Previous EG of the project: entities keep their ids when they keep any
    /// member row, and the id counter continues from it.
    pub previous: Option<&'a Eg>,
    /// Ids that must not be allocated, see [`reserved_ids`].
    pub reserved: &'a BTreeSet<u64>,
}

/// Groups candidates into entities over accepted merges, collapses equal
/// values per property (keeping every provenance record), retains the rest
/// side by side, and allocates ids.
pub fn assemble_eg(input: Assembly<'_>, etg: &Etg, resource: &LexicalResource) -> Result<Eg, EgError> {
    let unresolved: Vec<DecisionId> = input
        .merges
        .iter()
        .filter(|m| m.status == ReviewStatus::Suggested)
        .map(|m| m.id.clone())
        .collect();
    if !unresolved.is_empty() {
        return Err(EgError::Unresolved(unresolved));
    }
    let mut order: Vec<usize> = (0..input.candidates.len()).collect();
    order.sort_by_key(|&i| input.candidates[i].row_ref());
    let position: BTreeMap<RowRef, usize> = order
        .iter()
        .enumerate()
        .map(|(pos, &i)| (input.candidates[i].row_ref(), pos))
        .collect();
    let mut sets = DisjointSet::new(order.len());
    for m in input.merges.iter().filter(|m| m.status == ReviewStatus::Accepted) {
        if let (Some(&a), Some(&b)) = (position.get(&m.left), position.get(&m.right)) {
            sets.union(a, b);
        }
    }
    let mut components: BTreeMap<usize, Vec<&EntityCandidate>> = BTreeMap::new();
    for (pos, &i) in order.iter().enumerate() {
        components.entry(sets.find(pos)).or_default().push(&input.candidates[i]);
    }

    let mut previous_of: BTreeMap<&RowRef, EntityId> = BTreeMap::new();
    if let Some(prev) = input.previous {
        for e in prev.entities.values() {
            for m in &e.members {
                previous_of.insert(m, e.id);
            }
        }
    }
    let mut next = input.previous.map_or(1, |p| p.next_id.max(1));
    let mut used = BTreeSet::new();
    let mut eg = Eg::default();

    for members in components.values() {
        let rows: Vec<RowRef> = members.iter().map(|c| c.row_ref()).collect();
        let etypes: BTreeSet<EtypeId> = members.iter().map(|c| c.etype).collect();
        let mut etype = recognize_etype(&etypes, etg, resource)?.ok_or_else(|| EgError::IncomparableEtypes {
            members: rows.clone(),
            etypes: etypes.iter().copied().collect(),
        })?;
        // a reseat names any one member row
        if let Some((row, &target)) = rows.iter().find_map(|r| input.reseats.get(r).map(|t| (r, t))) {
            if !etg.etype_ancestors(etype).contains(&target) {
                return Err(EgError::BadReseat {
                    member: row.clone(),
                    etype: target,
                    current: etype,
                });
            }
            etype = target;
        }

        let mut collapsed: BTreeMap<(PropertyId, String), PropertyValue> = BTreeMap::new();
        for c in members {
            for v in &c.values {
                collapsed
                    .entry((v.property, v.comparison_key()))
                    .and_modify(|kept| kept.provenance.extend(v.provenance.iter().cloned()))
                    .or_insert_with(|| v.clone());
            }
        }
        let mut values: Vec<PropertyValue> = collapsed
            .into_values()
            .map(|mut v| {
                v.provenance.sort();
                v
            })
            .collect();
        values.sort_by(|a, b| (a.property, &a.provenance[0]).cmp(&(b.property, &b.provenance[0])));

        let reused = rows
            .iter()
            .filter_map(|r| previous_of.get(r).copied())
            .filter(|id| !used.contains(id) && !input.reserved.contains(&id.0))
            .min();
        let id = match reused {
            Some(id) => id,
            None => {
                while input.reserved.contains(&next) {
                    next += 1;
                }
                let id = EntityId(next);
                next += 1;
                id
            }
        };
        if !used.insert(id) || input.reserved.contains(&id.0) {
            return Err(EgError::IdCollision(id));
        }
        eg.entities.insert(
            id,
            Entity {
                id,
                etype,
                members: rows,
                values,
            },
        );
    }
    eg.next_id = next;
    for e in eg.entities.values() {
        for v in &e.values {
            if let Some(w) = &v.warning {
                eg.warnings.push(format!("{} {}: {w}", e.id, v.provenance[0].dataset));
            }
        }
    }
    Ok(eg)
}

#[cfg(test)]
mod tests;
