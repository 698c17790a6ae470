//! JSON-LD form of the EG. Property terms `p<n>` map to concept IRIs in the
//! context; each value is a node carrying the typed value, the raw cell, and
//! its provenance. Keys come out sorted, so equal EGs give equal bytes.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value as Json};

use super::{Eg, EgError, Entity, EntityId, PropertyValue, Provenance, RowRef, Value};
use crate::dataset::DatasetId;
use crate::etg::{concept_iri, Etg, PropertyId, Range};

const ENTITY_PREFIX: &str = "urn:strata:e:";
const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

fn term(p: PropertyId) -> String {
    format!("p{}", p.0)
}

pub fn export_jsonld(eg: &Eg, etg: &Etg) -> Result<String, EgError> {
    let mut context = Map::new();
    context.insert("strata".into(), json!("urn:strata:vocab:"));
    context.insert("xsd".into(), json!(XSD));
    for (id, p) in &etg.properties {
        context.insert(term(*id), json!({ "@id": concept_iri(p.concept) }));
    }
    let mut graph = Vec::with_capacity(eg.entities.len());
    for e in eg.entities.values() {
        let etype = etg.etypes.get(&e.etype).ok_or(EgError::UnknownEtype(e.etype))?;
        let mut node = Map::new();
        node.insert("@id".into(), json!(format!("{ENTITY_PREFIX}{}", e.id.0)));
        node.insert("@type".into(), json!(concept_iri(etype.concept)));
        node.insert(
            "strata:members".into(),
            Json::Array(e.members.iter().map(|m| json!(m.to_string())).collect()),
        );
        let mut by_property: BTreeMap<String, Vec<Json>> = BTreeMap::new();
        for v in &e.values {
            if !etg.properties.contains_key(&v.property) {
                return Err(EgError::JsonLd(format!("entity {} uses unknown property {}", e.id, v.property)));
            }
            by_property.entry(term(v.property)).or_default().push(value_node(v));
        }
        for (k, vs) in by_property {
            node.insert(k, Json::Array(vs));
        }
        graph.push(Json::Object(node));
    }
    let doc = json!({ "@context": context, "@graph": graph });
    let mut out = serde_json::to_string_pretty(&doc).map_err(|e| EgError::JsonLd(e.to_string()))?;
    out.push('\n');
    Ok(out)
}

fn value_node(v: &PropertyValue) -> Json {
    let mut node = Map::new();
    node.insert("strata:raw".into(), json!(v.raw));
    if let Some(n) = &v.normalized {
        node.insert(
            "strata:value".into(),
            json!({ "@value": n.to_string(), "@type": n.range().xsd() }),
        );
    }
    if let Some(w) = &v.warning {
        node.insert("strata:warning".into(), json!(w));
    }
    let prov: Vec<Json> = v
        .provenance
        .iter()
        .map(|p| {
            json!({
                "strata:dataset": p.dataset.as_str(),
                "strata:row": p.row,
                "strata:column": p.column,
            })
        })
        .collect();
    node.insert("strata:provenance".into(), Json::Array(prov));
    Json::Object(node)
}

fn bad(msg: impl Into<String>) -> EgError {
    EgError::JsonLd(msg.into())
}

/// Reads back a document written by [`export_jsonld`] against the same ETG.
pub fn import_jsonld(text: &str, etg: &Etg) -> Result<Eg, EgError> {
    let doc: Json = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let context = doc
        .get("@context")
        .and_then(Json::as_object)
        .ok_or_else(|| bad("missing @context"))?;
    let mut properties: BTreeMap<&str, PropertyId> = BTreeMap::new();
    for (k, v) in context {
        let Some(n) = k.strip_prefix('p').and_then(|n| n.parse::<u32>().ok()) else {
            continue;
        };
        let id = PropertyId(n);
        let p = etg.properties.get(&id).ok_or_else(|| bad(format!("term {k} is not an ETG property")))?;
        if v.get("@id").and_then(Json::as_str) != Some(concept_iri(p.concept).as_str()) {
            return Err(bad(format!("term {k} maps to a different concept than the ETG")));
        }
        properties.insert(k, id);
    }
    let graph = doc
        .get("@graph")
        .and_then(Json::as_array)
        .ok_or_else(|| bad("missing @graph"))?;

    let mut eg = Eg::default();
    for node in graph {
        let node = node.as_object().ok_or_else(|| bad("graph node is not an object"))?;
        let id = node
            .get("@id")
            .and_then(Json::as_str)
            .and_then(|s| s.strip_prefix(ENTITY_PREFIX))
            .and_then(|n| format!("#{n}").parse::<EntityId>().ok())
            .ok_or_else(|| bad("node without a valid @id"))?;
        let type_iri = node.get("@type").and_then(Json::as_str).ok_or_else(|| bad(format!("{id} has no @type")))?;
        let etype = etg
            .etypes
            .iter()
            .find(|(_, e)| concept_iri(e.concept) == type_iri)
            .map(|(id, _)| *id)
            .ok_or_else(|| bad(format!("{id}: @type {type_iri} is not an etype")))?;
        let members = node
            .get("strata:members")
            .and_then(Json::as_array)
            .ok_or_else(|| bad(format!("{id} has no members")))?
            .iter()
            .map(|m| m.as_str().and_then(parse_row_ref).ok_or_else(|| bad(format!("{id}: bad member"))))
            .collect::<Result<Vec<_>, _>>()?;
        let mut values = Vec::new();
        for (k, vs) in node {
            let Some(&property) = properties.get(k.as_str()) else {
                if k.starts_with('@') || k.starts_with("strata:") {
                    continue;
                }
                return Err(bad(format!("{id}: unknown term {k}")));
            };
            let range = etg.properties[&property].kind.value_range();
            for v in vs.as_array().ok_or_else(|| bad(format!("{id}.{k} is not an array")))? {
                values.push(read_value(v, property, range).map_err(|m| bad(format!("{id}.{k}: {m}")))?);
            }
        }
        values.sort_by(|a, b| (a.property, &a.provenance[0]).cmp(&(b.property, &b.provenance[0])));
        eg.next_id = eg.next_id.max(id.0 + 1);
        if eg
            .entities
            .insert(
                id,
                Entity {
                    id,
                    etype,
                    members,
                    values,
                },
            )
            .is_some()
        {
            return Err(EgError::IdCollision(id));
        }
    }
    Ok(eg)
}

fn parse_row_ref(s: &str) -> Option<RowRef> {
    let (dataset, row) = s.rsplit_once(".r")?;
    Some(RowRef {
        dataset: DatasetId::new(dataset),
        row: row.parse().ok()?,
    })
}

fn read_value(v: &Json, property: PropertyId, range: Range) -> Result<PropertyValue, String> {
    let raw = v
        .get("strata:raw")
        .and_then(Json::as_str)
        .ok_or("value without strata:raw")?
        .to_string();
    let normalized = match v.get("strata:value") {
        None => None,
        Some(n) => {
            let lexical = n.get("@value").and_then(Json::as_str).ok_or("value without @value")?;
            let ty = n.get("@type").and_then(Json::as_str).ok_or("value without @type")?;
            if ty != range.xsd() {
                return Err(format!("type {ty} does not match range {}", range.xsd()));
            }
            Some(Value::parse_as(lexical, range).map_err(|e| e.to_string())?)
        }
    };
    let warning = v.get("strata:warning").and_then(Json::as_str).map(str::to_string);
    let provenance = v
        .get("strata:provenance")
        .and_then(Json::as_array)
        .ok_or("value without provenance")?
        .iter()
        .map(|p| {
            let dataset = p.get("strata:dataset").and_then(Json::as_str)?;
            let row = p.get("strata:row").and_then(Json::as_u64)?;
            let column = p.get("strata:column").and_then(Json::as_u64)?;
            Some(Provenance {
                dataset: DatasetId::new(dataset),
                row: row as usize,
                column: column as usize,
            })
        })
        .collect::<Option<Vec<_>>>()
        .ok_or("malformed provenance record")?;
    if provenance.is_empty() {
        return Err("empty provenance".into());
    }
    Ok(PropertyValue {
        property,
        raw,
        normalized,
        provenance,
        warning,
    })
}
