//! Generators and brute-force oracles shared by the acceptance and property
//! suites. The oracles work from the generated parent lists only and never
//! call into the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use strata_core::config::Config;
use strata_core::eg::{assemble_eg, detect_entities, suggest_merges, Assembly, Eg, EntityCandidate, MergeCandidate};
use strata_core::etg::{build_etg, classify_elements, suggest_matches, ElementClassification, MatchCandidate};
use strata_core::leg::{build_leg, disambiguate_all, extract_terms, SenseDecision};
use strata_core::{Dataset, DatasetId, DatasetMeta, Etg, LexicalResource, Leg, ReviewStatus};

pub const FIXTURE_LEXICON: &str = include_str!("../../fixtures/cars/lexicon.txt");
pub const FIXTURE_CONFIG: &str = include_str!("../../fixtures/cars/config.txt");
pub const FIXTURE_LOG: &str = include_str!("../../fixtures/cars/decisions.jsonl");
pub const FIXTURE_DATASETS: [(&str, &str); 3] = [
    (
        include_str!("../../fixtures/cars/car.csv"),
        include_str!("../../fixtures/cars/car.meta"),
    ),
    (
        include_str!("../../fixtures/cars/vettura.csv"),
        include_str!("../../fixtures/cars/vettura.meta"),
    ),
    (
        include_str!("../../fixtures/cars/vehicle.csv"),
        include_str!("../../fixtures/cars/vehicle.meta"),
    ),
];

/// `parents[i]` lists the parents of concept `i + 1`; concept 1 is the root
/// and parents always precede their children.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub parents: Vec<Vec<u32>>,
    ancestors: Vec<BTreeSet<u32>>,
    depths: Vec<u32>,
}

impl Hierarchy {
    /// A random hierarchy of `n` noun concepts. Each concept after the root
    /// gets between one and `max_parents` parents among earlier concepts.
    pub fn random(rng: &mut impl Rng, n: usize, max_parents: usize) -> Self {
        let mut parents = vec![Vec::new()];
        for id in 2..=n as u32 {
            let k = rng.gen_range(1..=max_parents.min(id as usize - 1));
            let mut ps: Vec<u32> = (1..id).collect();
            ps.shuffle(rng);
            ps.truncate(k);
            ps.sort();
            parents.push(ps);
        }
        Hierarchy::from_parents(parents)
    }

    pub fn from_parents(parents: Vec<Vec<u32>>) -> Self {
        let mut ancestors: Vec<BTreeSet<u32>> = Vec::with_capacity(parents.len());
        let mut depths: Vec<u32> = Vec::with_capacity(parents.len());
        for (i, ps) in parents.iter().enumerate() {
            let mut set = BTreeSet::from([i as u32 + 1]);
            let mut depth = 1;
            for &p in ps {
                set.extend(ancestors[p as usize - 1].iter().copied());
                depth = depth.max(depths[p as usize - 1] + 1);
            }
            ancestors.push(set);
            depths.push(depth);
        }
        Hierarchy {
            parents,
            ancestors,
            depths,
        }
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> {
        1..=self.parents.len() as u32
    }

    pub fn parents_of(&self, id: u32) -> &[u32] {
        &self.parents[id as usize - 1]
    }

    /// Lexicon text with one English lemma per concept.
    pub fn lexicon_text(&self) -> String {
        let mut out = String::new();
        for id in self.ids() {
            let ps = self.parents_of(id);
            let parents = if ps.is_empty() {
                "-".to_string()
            } else {
                ps.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
            };
            out.push_str(&format!("C {id} noun {parents} {}: generated\n", lemma(id)));
        }
        for id in self.ids() {
            out.push_str(&format!("S {id} en {}\n", lemma(id)));
        }
        out
    }

    /// Reflexive ancestor set: the union over all parents.
    pub fn ancestors(&self, id: u32) -> BTreeSet<u32> {
        self.ancestors[id as usize - 1].clone()
    }

    /// Longest path to the root, counting the root as 1.
    pub fn depth(&self, id: u32) -> u32 {
        self.depths[id as usize - 1]
    }

    pub fn lca(&self, a: u32, b: u32) -> Option<u32> {
        let common: Vec<u32> = self.ancestors(a).intersection(&self.ancestors(b)).copied().collect();
        let best = common.iter().map(|&c| self.depth(c)).max()?;
        common.into_iter().filter(|&c| self.depth(c) == best).min()
    }

    pub fn similarity(&self, a: u32, b: u32) -> f64 {
        if a == b {
            return 1.0;
        }
        match self.lca(a, b) {
            Some(l) => 2.0 * f64::from(self.depth(l)) / f64::from(self.depth(a) + self.depth(b)),
            None => 0.0,
        }
    }

    /// Hasse diagram of the ancestor order restricted to `nodes`: the strict
    /// order minus every pair implied through a third member.
    pub fn transitive_reduction(&self, nodes: &BTreeSet<u32>) -> BTreeSet<(u32, u32)> {
        let above: BTreeMap<u32, BTreeSet<u32>> = nodes
            .iter()
            .map(|&n| {
                let a: BTreeSet<u32> = self
                    .ancestors(n)
                    .into_iter()
                    .filter(|x| *x != n && nodes.contains(x))
                    .collect();
                (n, a)
            })
            .collect();
        let mut out = BTreeSet::new();
        for (&child, ups) in &above {
            for &parent in ups {
                let implied = ups.iter().any(|&mid| mid != parent && above[&mid].contains(&parent));
                if !implied {
                    out.insert((child, parent));
                }
            }
        }
        out
    }
}

/// Letters-only lemma for a concept id, so cell and header text always
/// reads as a word.
pub fn lemma(id: u32) -> String {
    let mut n = id;
    let mut s = String::from("w");
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s
}

pub fn dataset(id: &str, csv: &str, meta: &str) -> Dataset {
    Dataset::from_csv(DatasetId::new(id), csv, DatasetMeta::parse(meta).unwrap()).unwrap()
}

pub fn fixture_datasets() -> Vec<Dataset> {
    FIXTURE_DATASETS
        .iter()
        .enumerate()
        .map(|(i, (csv, meta))| dataset(&format!("d{}", i + 1), csv, meta))
        .collect()
}

/// Everything one run of the pipeline produces when every decision is taken
/// automatically: matches between comparable concepts are accepted, the rest
/// rejected, and similarity merges rejected.
pub struct Run {
    pub senses: Vec<SenseDecision>,
    pub leg: Leg,
    pub classes: Vec<ElementClassification>,
    pub matches: Vec<MatchCandidate>,
    pub etg: Etg,
    pub candidates: Vec<EntityCandidate>,
    pub merges: Vec<MergeCandidate>,
    pub eg: Eg,
}

pub fn auto_run(resource: &LexicalResource, datasets: &[Dataset], cfg: &Config) -> Result<Run, String> {
    let terms: Vec<_> = datasets.iter().flat_map(extract_terms).collect();
    let senses = disambiguate_all(&terms, resource, &cfg.wsd);
    let leg = build_leg(&senses, resource).map_err(|e| e.to_string())?;
    let classes = classify_elements(&leg, datasets, resource, cfg).map_err(|e| e.to_string())?;
    let mut matches = suggest_matches(&classes, resource, cfg.match_floor).map_err(|e| e.to_string())?;
    let concept_of = |r: &strata_core::etg::ElementRef| {
        classes
            .iter()
            .find(|c| c.dataset == r.dataset)
            .and_then(|c| c.concept_of(r.element))
            .unwrap()
    };
    for m in &mut matches {
        if m.status == ReviewStatus::Suggested {
            let ok = resource.comparable(concept_of(&m.left), concept_of(&m.right)).unwrap();
            m.status = if ok { ReviewStatus::Accepted } else { ReviewStatus::Rejected };
        }
    }
    let etg = build_etg(&classes, &matches, &leg, resource).map_err(|e| e.to_string())?;
    let mut candidates = Vec::new();
    for d in datasets {
        candidates.extend(detect_entities(d, &etg).map_err(|e| e.to_string())?);
    }
    let mut merges = suggest_merges(&candidates, &etg, resource, cfg).map_err(|e| e.to_string())?;
    for m in &mut merges {
        if m.status == ReviewStatus::Suggested {
            m.status = ReviewStatus::Rejected;
        }
    }
    let eg = assemble(&candidates, &merges, None, datasets, &etg, resource)?;
    Ok(Run {
        senses,
        leg,
        classes,
        matches,
        etg,
        candidates,
        merges,
        eg,
    })
}

pub fn assemble(
    candidates: &[EntityCandidate],
    merges: &[MergeCandidate],
    previous: Option<&Eg>,
    datasets: &[Dataset],
    etg: &Etg,
    resource: &LexicalResource,
) -> Result<Eg, String> {
    let reserved = strata_core::eg::reserved_ids(datasets.iter().flat_map(|d| d.rows.iter().flatten().map(String::as_str)));
    assemble_eg(
        Assembly {
            candidates,
            merges,
            reseats: &BTreeMap::new(),
            previous,
            reserved: &reserved,
        },
        etg,
        resource,
    )
    .map_err(|e| e.to_string())
}

/// A random entity-resolution instance over the fixture lexicon: car tables
/// in English or Italian whose licence plates repeat across tables.
pub struct ErInstance {
    /// `(csv, meta)` per table.
    pub tables: Vec<(String, String)>,
    /// Plate of every row, by table then row.
    pub plates: Vec<Vec<String>>,
}

fn plate(rng: &mut impl Rng) -> String {
    let l = |rng: &mut dyn rand::RngCore| (b'A' + rng.gen_range(0..26u8)) as char;
    format!(
        "{}{}{:03}{}{}",
        l(rng),
        l(rng),
        rng.gen_range(0..1000),
        l(rng),
        l(rng)
    )
}

impl ErInstance {
    pub fn random(rng: &mut impl Rng, max_rows: usize) -> Self {
        let tables = rng.gen_range(1..=3);
        let total = rng.gen_range(tables..=max_rows);
        let mut sizes = vec![1; tables];
        for _ in tables..total {
            let i = rng.gen_range(0..tables);
            sizes[i] += 1;
        }
        let largest = *sizes.iter().max().unwrap();
        let pool_size = rng.gen_range(largest..=total.max(largest));
        let mut pool = BTreeSet::new();
        while pool.len() < pool_size {
            pool.insert(plate(rng));
        }
        let pool: Vec<String> = pool.into_iter().collect();

        let mut out = ErInstance {
            tables: Vec::new(),
            plates: Vec::new(),
        };
        for &size in &sizes {
            let italian = rng.gen_bool(0.4);
            let mut keys = pool.clone();
            keys.shuffle(rng);
            keys.truncate(size);
            let header = if italian {
                "Targa,Velocità,Carburante"
            } else {
                "License plate,Speed,Fuel"
            };
            let mut csv = format!("{header}\n");
            for k in &keys {
                let speed = match rng.gen_range(0..3) {
                    0 => format!("{}", rng.gen_range(90..220)),
                    1 => format!("{}.{}", rng.gen_range(90..220), rng.gen_range(0..10)),
                    _ => String::new(),
                };
                let fuel = if italian {
                    ["Benzina", ""][rng.gen_range(0..2)]
                } else {
                    ["Petrol", "Gasoline", ""][rng.gen_range(0..3)]
                };
                csv.push_str(&format!("{k},{speed},{fuel}\n"));
            }
            let meta = if italian {
                "name = Vettura\nlanguage = it\n"
            } else {
                "name = Car\nlanguage = en\n"
            }
            .to_string();
            out.tables.push((csv, meta));
            out.plates.push(keys);
        }
        out
    }

    /// Tables in the given order, numbered by position.
    pub fn datasets(&self, order: &[usize]) -> Vec<Dataset> {
        order
            .iter()
            .enumerate()
            .map(|(pos, &t)| dataset(&format!("d{}", pos + 1), &self.tables[t].0, &self.tables[t].1))
            .collect()
    }

    /// Rows grouped by plate, as `(table, row)` pairs.
    pub fn expected_groups(&self) -> BTreeSet<BTreeSet<(usize, usize)>> {
        let mut by_plate: BTreeMap<&str, BTreeSet<(usize, usize)>> = BTreeMap::new();
        for (t, rows) in self.plates.iter().enumerate() {
            for (r, p) in rows.iter().enumerate() {
                by_plate.entry(p).or_default().insert((t, r));
            }
        }
        by_plate.into_values().collect()
    }
}

/// Config for the ER instances: the fixture's identifying concepts with the
/// default floors.
pub fn er_config() -> Config {
    Config::parse(FIXTURE_CONFIG).unwrap()
}

/// Lexicon for the ER instances: the fixture plus the column names used.
pub fn er_lexicon() -> LexicalResource {
    let mut text = FIXTURE_LEXICON.to_string();
    text.push_str("S 18 en fuel\nS 18 it carburante\n");
    text.parse().unwrap()
}

/// One to four tables over a random hierarchy of `n` concepts. Each table is
/// named after a random concept and has one to four columns headed by lemmas
/// of other concepts, filled with numbers.
pub fn random_tables(rng: &mut impl Rng, n: usize) -> Vec<Dataset> {
    let mut datasets = Vec::new();
    for t in 0..rng.gen_range(1..=4) {
        let mut pool: Vec<u32> = (2..=n as u32).collect();
        pool.shuffle(rng);
        let table = pool[0];
        let columns = &pool[1..=rng.gen_range(1..=4.min(pool.len() - 1))];
        let header: Vec<String> = columns.iter().map(|c| lemma(*c)).collect();
        let mut csv = header.join(",") + "\n";
        for _ in 0..rng.gen_range(1..=3) {
            let row: Vec<String> = columns.iter().map(|_| rng.gen_range(0..1000).to_string()).collect();
            csv.push_str(&(row.join(",") + "\n"));
        }
        let meta = format!("name = {}\nlanguage = en\n", lemma(table));
        datasets.push(dataset(&format!("d{}", t + 1), &csv, &meta));
    }
    datasets
}
