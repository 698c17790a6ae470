//! Multilingual lexico-semantic resource: alinguistic concepts organized in
//! one hierarchy per part of speech, annotated with synsets in natural
//! languages and namespace pseudo-languages.

mod taxonomy;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::fold_lemma;

pub use taxonomy::Taxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(pub u32);

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for ConceptId {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(ConceptId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
}

impl Pos {
    pub const ALL: [Pos; 3] = [Pos::Noun, Pos::Verb, Pos::Adjective];

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "noun",
            Pos::Verb => "verb",
            Pos::Adjective => "adjective",
        }
    }
}

impl FromStr for Pos {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noun" | "n" => Ok(Pos::Noun),
            "verb" | "v" => Ok(Pos::Verb),
            "adjective" | "adj" | "a" => Ok(Pos::Adjective),
            other => Err(format!("unknown part of speech '{other}'")),
        }
    }
}

/// A natural-language code ("en") or a namespace pseudo-language ("ns:schema").
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageTag(String);

impl LanguageTag {
    pub fn new(tag: impl Into<String>) -> Result<Self, LexiconError> {
        let tag = tag.into();
        let valid = !tag.is_empty()
            && !tag.chars().any(char::is_whitespace)
            && match tag.split_once(':') {
                None => true,
                Some(("ns", rest)) => !rest.is_empty() && !rest.contains(':'),
                Some(_) => false,
            };
        if valid {
            Ok(LanguageTag(tag))
        } else {
            Err(LexiconError::InvalidLanguage(tag))
        }
    }

    /// Pseudo-language for a vocabulary prefix: `schema` becomes `ns:schema`.
    pub fn namespace(prefix: &str) -> Result<Self, LexiconError> {
        Self::new(format!("ns:{prefix}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_namespace(&self) -> bool {
        self.0.starts_with("ns:")
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for LanguageTag {
    type Error = LexiconError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        LanguageTag::new(value)
    }
}

impl From<LanguageTag> for String {
    fn from(tag: LanguageTag) -> Self {
        tag.0
    }
}

impl FromStr for LanguageTag {
    type Err = LexiconError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageTag::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "project")]
pub enum ConceptOrigin {
    Builtin,
    Enriched(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub id: ConceptId,
    pub pos: Pos,
    pub gloss: String,
    pub parents: BTreeSet<ConceptId>,
    pub origin: ConceptOrigin,
}

/// Borrowed view of one synset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Synset<'a> {
    pub concept: ConceptId,
    pub language: &'a LanguageTag,
    pub lemmas: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnrichRequest {
    NewLexeme {
        lemma: String,
        language: LanguageTag,
        concept: ConceptId,
    },
    NewConcept {
        gloss: String,
        pos: Pos,
        parent: ConceptId,
        lemma: String,
        language: LanguageTag,
    },
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cycle in concept hierarchy through concepts {}", join_ids(.concepts))]
    Cycle { concepts: Vec<ConceptId> },
    #[error("concept {concept} lists unknown parent {parent}")]
    DanglingParent { concept: ConceptId, parent: ConceptId },
    #[error("unknown concept {0}")]
    UnknownConcept(ConceptId),
    #[error("part of speech mismatch between concepts {0} and {1}")]
    PosMismatch(ConceptId, ConceptId),
    #[error("'{lemma}'@{language} already maps to concept {concept}")]
    Duplicate {
        lemma: String,
        language: LanguageTag,
        concept: ConceptId,
    },
    #[error("more than one {} root: {}", .pos.as_str(), join_ids(.roots))]
    MultipleRoots { pos: Pos, roots: Vec<ConceptId> },
    #[error("invalid language tag '{0}'")]
    InvalidLanguage(String),
    #[error("empty lemma")]
    EmptyLemma,
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join_ids(ids: &[ConceptId]) -> String {
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexicalResource {
    concepts: BTreeMap<ConceptId, Concept>,
    taxonomy: Taxonomy,
    synsets: BTreeMap<(ConceptId, LanguageTag), Vec<String>>,
    index: HashMap<(String, LanguageTag), Vec<ConceptId>>,
    roots: BTreeMap<Pos, ConceptId>,
    synthetic_roots: BTreeSet<ConceptId>,
}

impl LexicalResource {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        text.parse()
    }

    fn from_records(
        mut concepts: BTreeMap<ConceptId, Concept>,
        synsets: BTreeMap<(ConceptId, LanguageTag), Vec<String>>,
    ) -> Result<Self, LexiconError> {
        let mut roots = BTreeMap::new();
        let mut synthetic_roots = BTreeSet::new();
        let mut next = concepts.keys().next_back().map_or(0, |c| c.0 + 1);
        for pos in Pos::ALL {
            let declared: Vec<ConceptId> = concepts
                .values()
                .filter(|c| c.pos == pos && c.parents.is_empty())
                .map(|c| c.id)
                .collect();
            match declared.as_slice() {
                [] => {
                    let id = ConceptId(next);
                    next += 1;
                    concepts.insert(
                        id,
                        Concept {
                            id,
                            pos,
                            gloss: format!("{} root", pos.as_str()),
                            parents: BTreeSet::new(),
                            origin: ConceptOrigin::Builtin,
                        },
                    );
                    roots.insert(pos, id);
                    synthetic_roots.insert(id);
                }
                [one] => {
                    roots.insert(pos, *one);
                }
                many => {
                    return Err(LexiconError::MultipleRoots {
                        pos,
                        roots: many.to_vec(),
                    })
                }
            }
        }
        let taxonomy = Taxonomy::new(
            concepts
                .iter()
                .map(|(id, c)| (*id, c.parents.clone()))
                .collect(),
        )?;
        for c in concepts.values() {
            for p in &c.parents {
                if concepts[p].pos != c.pos {
                    return Err(LexiconError::PosMismatch(c.id, *p));
                }
            }
        }
        for (concept, _) in synsets.keys() {
            if !concepts.contains_key(concept) {
                return Err(LexiconError::UnknownConcept(*concept));
            }
        }
        let mut resource = LexicalResource {
            concepts,
            taxonomy,
            synsets,
            index: HashMap::new(),
            roots,
            synthetic_roots,
        };
        resource.rebuild_index();
        Ok(resource)
    }

    fn rebuild_index(&mut self) {
        let mut ranked: HashMap<(String, LanguageTag), Vec<(usize, ConceptId)>> = HashMap::new();
        for ((concept, lang), lemmas) in &self.synsets {
            for (rank, lemma) in lemmas.iter().enumerate() {
                ranked
                    .entry((lemma.clone(), lang.clone()))
                    .or_default()
                    .push((rank, *concept));
            }
        }
        self.index = ranked
            .into_iter()
            .map(|(key, mut entries)| {
                entries.sort();
                (key, entries.into_iter().map(|(_, c)| c).collect())
            })
            .collect();
    }

    fn reindex_lemma(&mut self, lemma: &str, lang: &LanguageTag) {
        let mut entries: Vec<(usize, ConceptId)> = self
            .synsets
            .iter()
            .filter(|((_, l), _)| l == lang)
            .filter_map(|((c, _), lemmas)| {
                lemmas.iter().position(|w| w == lemma).map(|rank| (rank, *c))
            })
            .collect();
        entries.sort();
        self.index.insert(
            (lemma.to_string(), lang.clone()),
            entries.into_iter().map(|(_, c)| c).collect(),
        );
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn concept(&self, id: ConceptId) -> Result<&Concept, LexiconError> {
        self.concepts.get(&id).ok_or(LexiconError::UnknownConcept(id))
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        self.concepts.contains_key(&id)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn root(&self, pos: Pos) -> ConceptId {
        self.roots[&pos]
    }

    /// Concepts loaded from the file or added by enrichment; excludes roots
    /// synthesized for parts of speech the file did not cover.
    pub fn user_concept_count(&self) -> usize {
        self.concepts.len() - self.synthetic_roots.len()
    }

    pub fn synset(&self, concept: ConceptId, language: &LanguageTag) -> Option<&[String]> {
        self.synsets
            .get(&(concept, language.clone()))
            .map(Vec::as_slice)
    }

    pub fn synsets(&self) -> impl Iterator<Item = Synset<'_>> {
        self.synsets.iter().map(|((concept, language), lemmas)| Synset {
            concept: *concept,
            language,
            lemmas,
        })
    }

    /// Most frequent lemma of `concept` in `language`.
    pub fn preferred_lemma(&self, concept: ConceptId, language: &LanguageTag) -> Option<&str> {
        self.synset(concept, language)
            .and_then(|l| l.first())
            .map(String::as_str)
    }

    pub fn has_language(&self, language: &LanguageTag) -> bool {
        self.synsets.keys().any(|(_, l)| l == language)
    }

    /// Senses of a lemma, ordered by the lemma's rank within each synset and
    /// then by concept id. Unknown words yield an empty list.
    pub fn lookup_senses(&self, lemma: &str, language: &LanguageTag) -> Vec<ConceptId> {
        self.index
            .get(&(fold_lemma(lemma), language.clone()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn is_ancestor(&self, ancestor: ConceptId, descendant: ConceptId) -> Result<bool, LexiconError> {
        self.taxonomy.is_ancestor(ancestor, descendant)
    }

    pub fn comparable(&self, a: ConceptId, b: ConceptId) -> Result<bool, LexiconError> {
        self.taxonomy.comparable(a, b)
    }

    pub fn depth(&self, id: ConceptId) -> Result<u32, LexiconError> {
        self.taxonomy.depth(id)
    }

    /// Direct-cover pairs `(child, parent)` of the ancestor order restricted
    /// to `nodes`: `parent` is a strict ancestor of `child` in the lexicon and
    /// no other member of `nodes` lies strictly between them.
    pub fn cover_edges(
        &self,
        nodes: &BTreeSet<ConceptId>,
    ) -> Result<BTreeSet<(ConceptId, ConceptId)>, LexiconError> {
        let mut edges = BTreeSet::new();
        for &node in nodes {
            let above: Vec<ConceptId> = self
                .taxonomy
                .ancestors(node)?
                .into_iter()
                .filter(|a| *a != node && nodes.contains(a))
                .collect();
            for &candidate in &above {
                let mut covered = false;
                for &other in &above {
                    if other != candidate && self.is_ancestor(candidate, other)? {
                        covered = true;
                        break;
                    }
                }
                if !covered {
                    edges.insert((node, candidate));
                }
            }
        }
        Ok(edges)
    }

    fn same_pos(&self, a: ConceptId, b: ConceptId) -> Result<(), LexiconError> {
        if self.concept(a)?.pos == self.concept(b)?.pos {
            Ok(())
        } else {
            Err(LexiconError::PosMismatch(a, b))
        }
    }

    pub fn lowest_common_ancestor(
        &self,
        a: ConceptId,
        b: ConceptId,
    ) -> Result<Option<ConceptId>, LexiconError> {
        self.same_pos(a, b)?;
        self.taxonomy.lowest_common_ancestor(a, b)
    }

    pub fn concept_similarity(&self, a: ConceptId, b: ConceptId) -> Result<f64, LexiconError> {
        self.same_pos(a, b)?;
        self.taxonomy.similarity(a, b)
    }

    /// Adds a lexeme or a whole concept. New concepts get the next free id
    /// and are marked as enriched by `project`; new lemmas rank last.
    pub fn enrich(&mut self, request: &EnrichRequest, project: &str) -> Result<ConceptId, LexiconError> {
        match request {
            EnrichRequest::NewLexeme {
                lemma,
                language,
                concept,
            } => {
                self.concept(*concept)?;
                let lemma = fold_lemma(lemma);
                if lemma.is_empty() {
                    return Err(LexiconError::EmptyLemma);
                }
                let lemmas = self.synsets.entry((*concept, language.clone())).or_default();
                if lemmas.contains(&lemma) {
                    return Err(LexiconError::Duplicate {
                        lemma,
                        language: language.clone(),
                        concept: *concept,
                    });
                }
                lemmas.push(lemma.clone());
                self.reindex_lemma(&lemma, language);
                Ok(*concept)
            }
            EnrichRequest::NewConcept {
                gloss,
                pos,
                parent,
                lemma,
                language,
            } => {
                let parent_pos = self.concept(*parent)?.pos;
                let lemma = fold_lemma(lemma);
                if lemma.is_empty() {
                    return Err(LexiconError::EmptyLemma);
                }
                let id = ConceptId(self.concepts.keys().next_back().map_or(0, |c| c.0 + 1));
                if parent_pos != *pos {
                    return Err(LexiconError::PosMismatch(id, *parent));
                }
                let parents = BTreeSet::from([*parent]);
                self.concepts.insert(
                    id,
                    Concept {
                        id,
                        pos: *pos,
                        gloss: gloss.trim().to_string(),
                        parents: parents.clone(),
                        origin: ConceptOrigin::Enriched(project.to_string()),
                    },
                );
                self.taxonomy.add_leaf(id, parents);
                self.synsets.insert((id, language.clone()), vec![lemma.clone()]);
                self.reindex_lemma(&lemma, language);
                Ok(id)
            }
        }
    }

    /// Serializes to the line format accepted by [`FromStr`]. Roots that were
    /// synthesized on load are written out, so ids survive a save/load cycle.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in self.concepts.values() {
            let parents = if c.parents.is_empty() {
                "-".to_string()
            } else {
                join_ids(&c.parents.iter().copied().collect::<Vec<_>>()).replace(", ", ",")
            };
            out.push_str(&format!("C {} {} {} {}\n", c.id, c.pos.as_str(), parents, c.gloss));
        }
        for ((concept, lang), lemmas) in &self.synsets {
            out.push_str(&format!("S {} {} {}\n", concept, lang, lemmas.join("|")));
        }
        out
    }
}

impl FromStr for LexicalResource {
    type Err = LexiconError;

    /// Parses `C <id> <pos> <parent-id,...|-> <gloss>` and
    /// `S <concept-id> <language> <lemma|lemma|...>` records; `#` starts a comment.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut concepts = BTreeMap::new();
        let mut synsets: BTreeMap<(ConceptId, LanguageTag), Vec<String>> = BTreeMap::new();
        let mut declared_at: BTreeMap<ConceptId, usize> = BTreeMap::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| LexiconError::Parse {
                line: line_no,
                message,
            };
            let (kind, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            match kind {
                "C" => {
                    let mut parts = rest.trim_start().splitn(4, char::is_whitespace);
                    let id: ConceptId = parts
                        .next()
                        .filter(|s| !s.is_empty())
                        .ok_or_else(|| err("missing concept id".into()))?
                        .parse()
                        .map_err(|e| err(format!("bad concept id: {e}")))?;
                    let pos: Pos = parts
                        .next()
                        .ok_or_else(|| err("missing part of speech".into()))?
                        .parse()
                        .map_err(err)?;
                    let parent_field = parts.next().ok_or_else(|| err("missing parent list".into()))?;
                    let parents = if parent_field == "-" {
                        BTreeSet::new()
                    } else {
                        parent_field
                            .split(',')
                            .map(|p| p.parse::<ConceptId>())
                            .collect::<Result<BTreeSet<_>, _>>()
                            .map_err(|e| err(format!("bad parent id: {e}")))?
                    };
                    let gloss = parts.next().unwrap_or("").trim().to_string();
                    if declared_at.insert(id, line_no).is_some() {
                        return Err(err(format!("concept {id} declared twice")));
                    }
                    concepts.insert(
                        id,
                        Concept {
                            id,
                            pos,
                            gloss,
                            parents,
                            origin: ConceptOrigin::Builtin,
                        },
                    );
                }
                "S" => {
                    let mut parts = rest.trim_start().splitn(3, char::is_whitespace);
                    let concept: ConceptId = parts
                        .next()
                        .filter(|s| !s.is_empty())
                        .ok_or_else(|| err("missing concept id".into()))?
                        .parse()
                        .map_err(|e| err(format!("bad concept id: {e}")))?;
                    let language = LanguageTag::new(
                        parts.next().ok_or_else(|| err("missing language tag".into()))?,
                    )
                    .map_err(|e| err(e.to_string()))?;
                    let lemmas: Vec<String> = parts
                        .next()
                        .unwrap_or("")
                        .split('|')
                        .map(fold_lemma)
                        .filter(|l| !l.is_empty())
                        .collect();
                    if lemmas.is_empty() {
                        return Err(err("synset without lemmas".into()));
                    }
                    let mut seen = BTreeSet::new();
                    if let Some(dup) = lemmas.iter().find(|l| !seen.insert(*l)) {
                        return Err(err(format!("lemma '{dup}' repeated in synset")));
                    }
                    if synsets.insert((concept, language.clone()), lemmas).is_some() {
                        return Err(err(format!(
                            "second synset for concept {concept} in language {language}"
                        )));
                    }
                }
                other => return Err(err(format!("unknown record type '{other}'"))),
            }
        }

        for c in concepts.values() {
            for p in &c.parents {
                if !concepts.contains_key(p) {
                    return Err(LexiconError::Parse {
                        line: declared_at[&c.id],
                        message: format!("concept {} lists unknown parent {}", c.id, p),
                    });
                }
            }
        }
        if let Some(((concept, _), _)) = synsets.iter().find(|((c, _), _)| !concepts.contains_key(c)) {
            return Err(LexiconError::UnknownConcept(*concept));
        }
        LexicalResource::from_records(concepts, synsets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = "\
# entity > object > vehicle > car
C 1 noun - entity
C 2 noun 1 physical object
C 3 noun 2 vehicle
C 4 noun 3 car
C 5 noun 1 attribute
C 6 noun 5 speed
S 4 en car|auto|automobile
S 4 it vettura|automobile
S 3 en vehicle
S 6 ns:schema speed
S 6 it velocità
";

    fn lang(s: &str) -> LanguageTag {
        LanguageTag::new(s).unwrap()
    }

    #[test]
    fn empty_file_has_only_roots() {
        let r: LexicalResource = "".parse().unwrap();
        assert_eq!(r.user_concept_count(), 0);
        assert_eq!(r.concepts().count(), 3);
        for pos in Pos::ALL {
            assert_eq!(r.concept(r.root(pos)).unwrap().pos, pos);
        }
    }

    #[test]
    fn chain_fixture() {
        let r: LexicalResource = CHAIN.parse().unwrap();
        let nouns = r.concepts().filter(|c| c.pos == Pos::Noun).count();
        assert_eq!(nouns, 6);
        assert_eq!(r.concept(ConceptId(4)).unwrap().parents, BTreeSet::from([ConceptId(3)]));
        assert_eq!(r.root(Pos::Noun), ConceptId(1));
    }

    #[test]
    fn lookup() {
        let r: LexicalResource = CHAIN.parse().unwrap();
        assert_eq!(r.lookup_senses("Vettura", &lang("it")), vec![ConceptId(4)]);
        assert_eq!(r.lookup_senses("speed", &lang("ns:schema")), vec![ConceptId(6)]);
        assert!(r.lookup_senses("zzzz", &lang("en")).is_empty());
    }

    #[test]
    fn two_hop_cycle_rejected() {
        let text = "C 1 noun - entity\nC 2 noun 1,4 vehicle\nC 3 noun 2 truck\nC 4 noun 3 car\n";
        match text.parse::<LexicalResource>() {
            Err(LexiconError::Cycle { concepts }) => {
                assert!(concepts.contains(&ConceptId(4)));
                assert!(concepts.contains(&ConceptId(2)));
            }
            other => panic!("expected cycle error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = "C 1 noun - entity\nX what\n".parse::<LexicalResource>().unwrap_err();
        assert!(matches!(err, LexiconError::Parse { line: 2, .. }), "{err}");
        let err = "C 1 noun - entity\n\nC 2 noun 9 orphan\n".parse::<LexicalResource>().unwrap_err();
        assert!(matches!(err, LexiconError::Parse { line: 3, .. }), "{err}");
        let err = "C 1 noun - a\nC 2 noun - b\n".parse::<LexicalResource>().unwrap_err();
        assert!(matches!(err, LexiconError::MultipleRoots { .. }), "{err}");
    }

    #[test]
    fn enrich_new_lexeme() {
        let mut r: LexicalResource = CHAIN.parse().unwrap();
        let got = r
            .enrich(
                &EnrichRequest::NewLexeme {
                    lemma: "macchina".into(),
                    language: lang("it"),
                    concept: ConceptId(4),
                },
                "p",
            )
            .unwrap();
        assert_eq!(got, ConceptId(4));
        assert_eq!(r.lookup_senses("macchina", &lang("it")), vec![ConceptId(4)]);
        assert_eq!(r.synset(ConceptId(4), &lang("it")).unwrap().last().unwrap(), "macchina");

        let before = r.clone();
        let dup = r.enrich(
            &EnrichRequest::NewLexeme {
                lemma: "Vettura".into(),
                language: lang("it"),
                concept: ConceptId(4),
            },
            "p",
        );
        assert!(matches!(dup, Err(LexiconError::Duplicate { .. })));
        assert_eq!(r, before);
    }

    #[test]
    fn enrich_new_concept() {
        let mut r: LexicalResource = CHAIN.parse().unwrap();
        let id = r
            .enrich(
                &EnrichRequest::NewConcept {
                    gloss: "body style of a car".into(),
                    pos: Pos::Noun,
                    parent: ConceptId(5),
                    lemma: "tipo di corpo".into(),
                    language: lang("it"),
                },
                "demo",
            )
            .unwrap();
        assert!(!CHAIN.contains(&format!("C {id} ")));
        assert!(r.is_ancestor(ConceptId(5), id).unwrap());
        assert_eq!(r.concept(id).unwrap().origin, ConceptOrigin::Enriched("demo".into()));
        assert_eq!(r.lookup_senses("Tipo di corpo", &lang("it")), vec![id]);
        let unknown_parent = r.enrich(
            &EnrichRequest::NewConcept {
                gloss: "x".into(),
                pos: Pos::Noun,
                parent: ConceptId(99),
                lemma: "x".into(),
                language: lang("en"),
            },
            "demo",
        );
        assert!(matches!(unknown_parent, Err(LexiconError::UnknownConcept(_))));
    }

    #[test]
    fn save_load_keeps_ids() {
        let mut r: LexicalResource = CHAIN.parse().unwrap();
        r.enrich(
            &EnrichRequest::NewLexeme {
                lemma: "macchina".into(),
                language: lang("it"),
                concept: ConceptId(4),
            },
            "p",
        )
        .unwrap();
        let reloaded: LexicalResource = r.to_text().parse().unwrap();
        assert_eq!(reloaded.to_text(), r.to_text());
        assert_eq!(reloaded.lookup_senses("macchina", &lang("it")), vec![ConceptId(4)]);
        assert_eq!(reloaded.root(Pos::Verb), r.root(Pos::Verb));
    }

    #[test]
    fn language_tags() {
        assert!(LanguageTag::new("en").is_ok());
        assert!(LanguageTag::new("ns:vso").unwrap().is_namespace());
        assert!(LanguageTag::new("").is_err());
        assert!(LanguageTag::new("x:vso").is_err());
        assert!(LanguageTag::new("ns:").is_err());
    }

    #[test]
    fn similarity_requires_same_pos() {
        let r: LexicalResource = "C 1 noun - entity\nC 2 verb - act\n".parse().unwrap();
        assert!(matches!(
            r.concept_similarity(ConceptId(1), ConceptId(2)),
            Err(LexiconError::PosMismatch(..))
        ));
    }
}
