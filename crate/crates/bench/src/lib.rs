//! Synthetic workloads shared by the criterion benches. Everything is
//! deterministic so runs compare across commits.

use std::collections::{BTreeMap, BTreeSet};

use strata_core::config::Config;
use strata_core::eg::{assemble_eg, detect_entities, reserved_ids, suggest_merges, Assembly, Eg, EntityCandidate, MergeCandidate};
use strata_core::etg::{build_etg, classify_elements, suggest_matches, ElementClassification, MatchCandidate};
use strata_core::leg::{build_leg, disambiguate_all, extract_terms, SenseDecision};
use strata_core::{Dataset, DatasetId, DatasetMeta, Etg, Leg, LexicalResource, ReviewStatus};

const LEXICON: &str = include_str!("../../core/fixtures/cars/lexicon.txt");
const CONFIG: &str = include_str!("../../core/fixtures/cars/config.txt");

/// The car lexicon, with lemmas for the fuel columns.
pub fn car_lexicon() -> LexicalResource {
    format!("{LEXICON}S 18 en fuel\nS 18 it carburante\n")
        .parse()
        .expect("fixture lexicon loads")
}

pub fn car_config() -> Config {
    Config::parse(CONFIG).expect("fixture config parses")
}

/// A complete `branching`-ary noun hierarchy of `n` concepts, one lemma each.
pub fn balanced_lexicon(n: u32, branching: u32) -> LexicalResource {
    let mut text = String::new();
    for id in 1..=n {
        let parent = if id == 1 { "-".to_string() } else { ((id - 2) / branching + 1).to_string() };
        text.push_str(&format!("C {id} noun {parent} generated\n"));
    }
    for id in 1..=n {
        text.push_str(&format!("S {id} en w{id}x\n"));
    }
    text.parse().expect("generated lexicon loads")
}

fn plate(i: usize) -> String {
    let letters = |k: usize| [(b'A' + (k % 26) as u8) as char, (b'A' + (k / 26 % 26) as u8) as char];
    let [a, b] = letters(i);
    let [c, d] = letters(i / 676);
    format!("{a}{b}{:03}{c}{d}", i % 1000)
}

/// `tables` car tables of `rows` rows each, alternating English and Italian.
/// Table `t` holds plates `t * rows / 2 ..`, so neighbouring tables share half
/// their cars.
pub fn car_tables(tables: usize, rows: usize) -> Vec<Dataset> {
    (0..tables)
        .map(|t| {
            let italian = t % 2 == 1;
            let mut csv = String::from(if italian { "Targa,Velocità,Carburante\n" } else { "License plate,Speed,Fuel\n" });
            for r in 0..rows {
                let car = t * rows / 2 + r;
                let fuel = match (italian, car % 3) {
                    (true, 0) => "Benzina",
                    (false, 0) => "Petrol",
                    (false, 1) => "Gasoline",
                    _ => "",
                };
                csv.push_str(&format!("{},{}.{},{fuel}\n", plate(car), 90 + car % 130, car % 10));
            }
            let meta = if italian { "name = Vettura\nlanguage = it\n" } else { "name = Car\nlanguage = en\n" };
            Dataset::from_csv(
                DatasetId::new(format!("d{}", t + 1)),
                &csv,
                DatasetMeta::parse(meta).expect("meta parses"),
            )
            .expect("generated table loads")
        })
        .collect()
}

/// Phase one with every sense decision taken as proposed.
pub fn leg_phase(resource: &LexicalResource, datasets: &[Dataset], cfg: &Config) -> (Vec<SenseDecision>, Leg) {
    let terms: Vec<_> = datasets.iter().flat_map(extract_terms).collect();
    let senses = disambiguate_all(&terms, resource, &cfg.wsd);
    let leg = build_leg(&senses, resource).expect("car tables disambiguate");
    (senses, leg)
}

/// Phase two, accepting suggested matches between comparable concepts.
pub fn etg_phase(
    resource: &LexicalResource,
    leg: &Leg,
    datasets: &[Dataset],
    cfg: &Config,
) -> (Vec<ElementClassification>, Vec<MatchCandidate>, Etg) {
    let classes = classify_elements(leg, datasets, resource, cfg).expect("classification succeeds");
    let mut matches = suggest_matches(&classes, resource, cfg.match_floor).expect("matching succeeds");
    for m in &mut matches {
        if m.status == ReviewStatus::Suggested {
            let concept = |r: &strata_core::etg::ElementRef| {
                classes.iter().find(|c| c.dataset == r.dataset).and_then(|c| c.concept_of(r.element)).unwrap()
            };
            let ok = resource.comparable(concept(&m.left), concept(&m.right)).unwrap_or(false);
            m.status = if ok { ReviewStatus::Accepted } else { ReviewStatus::Rejected };
        }
    }
    let etg = build_etg(&classes, &matches, leg, resource).expect("coherent ETG");
    (classes, matches, etg)
}

/// Phase three with similarity merges rejected.
pub fn eg_phase(
    resource: &LexicalResource,
    etg: &Etg,
    datasets: &[Dataset],
    cfg: &Config,
) -> (Vec<EntityCandidate>, Vec<MergeCandidate>, Eg) {
    let mut candidates = Vec::new();
    for d in datasets {
        candidates.extend(detect_entities(d, etg).expect("rows detect"));
    }
    let mut merges = suggest_merges(&candidates, etg, resource, cfg).expect("merging succeeds");
    for m in &mut merges {
        if m.status == ReviewStatus::Suggested {
            m.status = ReviewStatus::Rejected;
        }
    }
    let eg = assemble(resource, etg, datasets, &candidates, &merges);
    (candidates, merges, eg)
}

pub fn assemble(
    resource: &LexicalResource,
    etg: &Etg,
    datasets: &[Dataset],
    candidates: &[EntityCandidate],
    merges: &[MergeCandidate],
) -> Eg {
    let reserved: BTreeSet<u64> = reserved_ids(datasets.iter().flat_map(|d| d.rows.iter().flatten().map(String::as_str)));
    assemble_eg(
        Assembly {
            candidates,
            merges,
            reseats: &BTreeMap::new(),
            previous: None,
            reserved: &reserved,
        },
        etg,
        resource,
    )
    .expect("assembly succeeds")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_plates_collapse() {
        let (resource, cfg) = (car_lexicon(), car_config());
        let datasets = car_tables(2, 10);
        let (_, leg) = leg_phase(&resource, &datasets, &cfg);
        let (_, _, etg) = etg_phase(&resource, &leg, &datasets, &cfg);
        let (candidates, _, eg) = eg_phase(&resource, &etg, &datasets, &cfg);
        assert_eq!(candidates.len(), 20);
        assert_eq!(eg.entities.len(), 15);
    }

    #[test]
    fn plates_are_distinct() {
        let plates: BTreeSet<String> = (0..20_000).map(plate).collect();
        assert_eq!(plates.len(), 20_000);
    }
}
