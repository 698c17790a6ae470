//! Minimal OWL-in-Turtle writer for the ETG. Output is sorted by subject IRI
//! and predicate so identical graphs serialize to identical bytes.

use std::collections::{BTreeMap, BTreeSet};

use super::{check_coherence, Etg, EtgError, PropertyKind};
use crate::leg::Leg;
use crate::lexicon::{ConceptId, LanguageTag, LexicalResource};

const PREFIXES: &str = "\
@prefix owl: <http://www.w3.org/2002/07/owl#> .
@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
@prefix strata: <urn:strata:vocab:> .
@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .
";

pub fn concept_iri(concept: ConceptId) -> String {
    format!("urn:strata:c:{concept}")
}

// predicate order within a subject block
const A: u8 = 0;
const LABEL: u8 = 1;
const SUBCLASS: u8 = 2;
const DOMAIN: u8 = 3;
const RANGE: u8 = 4;
const CONCEPT: u8 = 5;

fn predicate(slot: u8) -> &'static str {
    match slot {
        A => "a",
        LABEL => "rdfs:label",
        SUBCLASS => "rdfs:subClassOf",
        DOMAIN => "rdfs:domain",
        RANGE => "rdfs:range",
        _ => "strata:conceptId",
    }
}

/// Serializes a coherent ETG: etypes as classes, properties with domain and
/// range, every element annotated with its concept id and one label per
/// language it was written in.
pub fn export_etg(etg: &Etg, leg: &Leg, resource: &LexicalResource) -> Result<String, EtgError> {
    let violations = check_coherence(etg, leg, resource);
    if !violations.is_empty() {
        return Err(EtgError::Violations(violations));
    }
    let mut subjects: BTreeMap<String, BTreeSet<(u8, String)>> = BTreeMap::new();
    let mut add = |concept: ConceptId, slot: u8, object: String| {
        subjects
            .entry(format!("<{}>", concept_iri(concept)))
            .or_default()
            .insert((slot, object));
    };
    let annotate = |concept: ConceptId, add: &mut dyn FnMut(ConceptId, u8, String)| {
        add(concept, CONCEPT, concept.to_string());
        for (lang, label) in labels(leg, concept) {
            add(concept, LABEL, format!("{}@{}", literal(&label), turtle_lang(&lang)));
        }
    };

    for e in etg.etypes.values() {
        add(e.concept, A, "owl:Class".into());
        annotate(e.concept, &mut add);
    }
    for &(child, parent) in &etg.subsumption {
        add(
            etg.etypes[&child].concept,
            SUBCLASS,
            format!("<{}>", concept_iri(etg.etypes[&parent].concept)),
        );
    }
    for &(etype, reference) in &etg.reference_parents {
        add(etg.etypes[&etype].concept, SUBCLASS, format!("<{}>", concept_iri(reference)));
    }
    for p in etg.properties.values() {
        let (class, range) = match p.kind {
            PropertyKind::DatatypeProperty { range } => ("owl:DatatypeProperty", range.xsd().to_string()),
            PropertyKind::ObjectProperty { target } => ("owl:ObjectProperty", format!("<{}>", concept_iri(target))),
        };
        add(p.concept, A, class.into());
        add(p.concept, DOMAIN, format!("<{}>", concept_iri(etg.etypes[&p.domain].concept)));
        add(p.concept, RANGE, range);
        annotate(p.concept, &mut add);
    }

    let mut out = String::from(PREFIXES);
    if subjects.is_empty() {
        return Ok(out);
    }
    out.push_str("\nstrata:conceptId a owl:AnnotationProperty .\n");
    // IRIs compare as plain strings, e.g. c:10 sorts before c:4
    for (subject, triples) in &subjects {
        out.push('\n');
        out.push_str(subject);
        let mut by_pred: BTreeMap<u8, Vec<&str>> = BTreeMap::new();
        for (slot, obj) in triples {
            by_pred.entry(*slot).or_default().push(obj);
        }
        let n = by_pred.len();
        for (i, (slot, objects)) in by_pred.into_iter().enumerate() {
            out.push_str(if i == 0 { " " } else { "    " });
            out.push_str(predicate(slot));
            out.push(' ');
            out.push_str(&objects.join(", "));
            out.push_str(if i + 1 == n { " .\n" } else { " ;\n" });
        }
    }
    Ok(out)
}

/// One label per annotating language: the first term in that language.
fn labels(leg: &Leg, concept: ConceptId) -> BTreeMap<LanguageTag, String> {
    let mut out = BTreeMap::new();
    if let Some(terms) = leg.annotations.get(&concept) {
        for t in terms {
            out.entry(t.language.clone()).or_insert_with(|| t.surface.clone());
        }
    }
    out
}

/// Namespace pseudo-languages become private-use tags: `ns:schema` -> `x-ns-schema`.
fn turtle_lang(tag: &LanguageTag) -> String {
    if let Some(ns) = tag.as_str().strip_prefix("ns:") {
        let clean: String = ns
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
            .collect();
        format!("x-ns-{clean}")
    } else {
        tag.as_str().to_string()
    }
}

fn literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
