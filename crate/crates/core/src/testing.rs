//! The car/vehicle fixture wired up for unit tests.

use crate::config::Config;
use crate::dataset::{Dataset, DatasetId, DatasetMeta};
use crate::leg::{apply_sense_decision, build_leg, disambiguate_all, extract_terms, Leg, SenseDecision, SenseResolution};
use crate::lexicon::{ConceptId, EnrichRequest, LanguageTag, LexicalResource, Pos};

pub const LEXICON: &str = include_str!("../fixtures/cars/lexicon.txt");
pub const CONFIG: &str = include_str!("../fixtures/cars/config.txt");
pub const DATASETS: [(&str, &str, &str); 3] = [
    (
        "d1",
        include_str!("../fixtures/cars/car.csv"),
        include_str!("../fixtures/cars/car.meta"),
    ),
    (
        "d2",
        include_str!("../fixtures/cars/vettura.csv"),
        include_str!("../fixtures/cars/vettura.meta"),
    ),
    (
        "d3",
        include_str!("../fixtures/cars/vehicle.csv"),
        include_str!("../fixtures/cars/vehicle.meta"),
    ),
];

pub fn lexicon() -> LexicalResource {
    LEXICON.parse().unwrap()
}

pub fn config() -> Config {
    Config::parse(CONFIG).unwrap()
}

pub fn datasets() -> Vec<Dataset> {
    DATASETS
        .iter()
        .map(|(id, csv, meta)| Dataset::from_csv(DatasetId::new(*id), csv, DatasetMeta::parse(meta).unwrap()).unwrap())
        .collect()
}

pub fn body_style_request() -> EnrichRequest {
    EnrichRequest::NewConcept {
        gloss: "body style of a car".into(),
        pos: Pos::Noun,
        parent: ConceptId(6),
        lemma: "tipo di corpo".into(),
        language: LanguageTag::new("it").unwrap(),
    }
}

/// Sense decisions with the two manual resolutions applied; the lexicon gains
/// the body-style concept.
pub fn resolved_senses(resource: &mut LexicalResource) -> Vec<SenseDecision> {
    let datasets = datasets();
    let terms: Vec<_> = datasets.iter().flat_map(extract_terms).collect();
    let mut decisions = disambiguate_all(&terms, resource, &config().wsd);
    for d in &mut decisions {
        let resolution = match d.id.as_str() {
            "s:d1.c0" => SenseResolution::Choose {
                concept: ConceptId(9),
                force: false,
            },
            "s:d2.c2" => SenseResolution::EnrichAndChoose {
                request: body_style_request(),
            },
            _ => continue,
        };
        apply_sense_decision(d, &resolution, resource, "fixture").unwrap();
    }
    decisions
}

pub fn leg() -> (LexicalResource, Leg) {
    let mut resource = lexicon();
    let senses = resolved_senses(&mut resource);
    let leg = build_leg(&senses, &resource).unwrap();
    (resource, leg)
}

/// ETG of the fixture with every match suggestion accepted.
pub fn etg() -> (LexicalResource, Leg, crate::etg::Etg) {
    use crate::decision::ReviewStatus;
    use crate::etg::{build_etg, classify_elements, suggest_matches};
    let (resource, leg) = leg();
    let cfg = config();
    let classes = classify_elements(&leg, &datasets(), &resource, &cfg).unwrap();
    let mut matches = suggest_matches(&classes, &resource, cfg.match_floor).unwrap();
    for m in &mut matches {
        m.status = ReviewStatus::Accepted;
    }
    let etg = build_etg(&classes, &matches, &leg, &resource).unwrap();
    (resource, leg, etg)
}
