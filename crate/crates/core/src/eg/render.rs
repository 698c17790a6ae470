//! Presentation of the EG in a chosen language, word by word: each
//! concept-backed label becomes the concept's first lemma in that language.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Eg, EgError};
use crate::etg::Etg;
use crate::leg::Leg;
use crate::lexicon::{ConceptId, LanguageTag, LexicalResource};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Label {
    pub concept: ConceptId,
    pub text: String,
    /// No lexeme in the requested language; `text` is an input term.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderedValue {
    pub property: Label,
    /// Normalized forms, raw cells for values that failed normalization.
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderedEntity {
    pub id: String,
    pub etype: Label,
    pub values: Vec<RenderedValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderedEg {
    pub language: LanguageTag,
    pub entities: Vec<RenderedEntity>,
    /// Concepts rendered through a fallback label.
    pub fallbacks: BTreeSet<ConceptId>,
}

impl RenderedEg {
    /// Tab-separated table, one line per value. Fallback labels carry a `*`.
    pub fn to_text(&self) -> String {
        let mark = |l: &Label| {
            if l.fallback {
                format!("{}*", l.text)
            } else {
                l.text.clone()
            }
        };
        let mut out = String::from("entity\tetype\tproperty\tvalue\n");
        for e in &self.entities {
            for v in &e.values {
                for value in &v.values {
                    out.push_str(&format!("{}\t{}\t{}\t{value}\n", e.id, mark(&e.etype), mark(&v.property)));
                }
            }
            if e.values.is_empty() {
                out.push_str(&format!("{}\t{}\t\t\n", e.id, mark(&e.etype)));
            }
        }
        if !self.fallbacks.is_empty() {
            out.push_str(&format!("# * no {} lexeme, label taken from the input\n", self.language));
        }
        out
    }
}

pub fn render_eg(
    eg: &Eg,
    etg: &Etg,
    leg: &Leg,
    resource: &LexicalResource,
    language: &LanguageTag,
) -> Result<RenderedEg, EgError> {
    if !resource.has_language(language) {
        return Err(EgError::UnsupportedLanguage(language.to_string()));
    }
    let mut fallbacks = BTreeSet::new();
    let mut label = |concept: ConceptId| -> Label {
        match resource.preferred_lemma(concept, language) {
            Some(lemma) => Label {
                concept,
                text: lemma.to_string(),
                fallback: false,
            },
            None => {
                fallbacks.insert(concept);
                let text = leg
                    .label_for(concept, Some(language))
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("c{concept}"));
                Label {
                    concept,
                    text,
                    fallback: true,
                }
            }
        }
    };
    let mut entities = Vec::with_capacity(eg.entities.len());
    for e in eg.entities.values() {
        let etype = etg.etypes.get(&e.etype).ok_or(EgError::UnknownEtype(e.etype))?;
        let etype = label(etype.concept);
        let mut grouped: BTreeMap<_, Vec<String>> = BTreeMap::new();
        for v in &e.values {
            let text = v.normalized.as_ref().map_or_else(|| v.raw.clone(), ToString::to_string);
            grouped.entry(v.property).or_default().push(text);
        }
        let values = grouped
            .into_iter()
            .map(|(p, values)| {
                let concept = etg.properties[&p].concept;
                RenderedValue {
                    property: label(concept),
                    values,
                }
            })
            .collect();
        entities.push(RenderedEntity {
            id: e.id.to_string(),
            etype,
            values,
        });
    }
    Ok(RenderedEg {
        language: language.clone(),
        entities,
        fallbacks,
    })
}
