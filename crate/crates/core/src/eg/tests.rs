use super::*;
use crate::lexicon::LanguageTag;
use crate::testing;

struct Fixture {
    resource: LexicalResource,
    leg: crate::leg::Leg,
    etg: Etg,
    datasets: Vec<Dataset>,
    candidates: Vec<EntityCandidate>,
}

fn fixture() -> Fixture {
    let (resource, leg, etg) = testing::etg();
    let datasets = testing::datasets();
    let candidates = datasets
        .iter()
        .flat_map(|d| detect_entities(d, &etg).unwrap())
        .collect();
    Fixture {
        resource,
        leg,
        etg,
        datasets,
        candidates,
    }
}

fn assemble(f: &Fixture, merges: &[MergeCandidate], previous: Option<&Eg>) -> Eg {
    let reserved = reserved_ids(f.datasets.iter().flat_map(|d| d.cell_values()));
    assemble_eg(
        Assembly {
            candidates: &f.candidates,
            merges,
            reseats: &BTreeMap::new(),
            previous,
            reserved: &reserved,
        },
        &f.etg,
        &f.resource,
    )
    .unwrap()
}

fn fixture_eg(f: &Fixture) -> Eg {
    let merges = suggest_merges(&f.candidates, &f.etg, &f.resource, &testing::config()).unwrap();
    assemble(f, &merges, None)
}

fn prop(f: &Fixture, dataset: &str, column: usize) -> PropertyId {
    f.etg.property_for(&DatasetId::new(dataset), column).unwrap()
}

#[test]
fn normalizes_by_range() {
    let d = normalize_value(" 155.0 ", Range::Decimal).unwrap();
    assert_eq!(d.to_string(), "155.0");
    assert_eq!(d.comparison_key(), normalize_value("155", Range::Decimal).unwrap().comparison_key());
    assert_eq!(
        Value::Integer(155).comparison_key(),
        normalize_value("155.00", Range::Decimal).unwrap().comparison_key()
    );
    assert_eq!(normalize_value("25/11/2020", Range::Date).unwrap().to_string(), "2020-11-25");
    assert_eq!(normalize_value("2020-11-25", Range::Date).unwrap().to_string(), "2020-11-25");
    assert!(normalize_value("Petrol", Range::Date).is_err());
    assert!(normalize_value("1e5", Range::Decimal).is_err());
    assert!(normalize_value("1,5", Range::Decimal).is_err());
    let s = normalize_value("Coupé", Range::String).unwrap();
    assert_eq!(s.to_string(), "Coupé");
    assert_eq!(s.comparison_key(), Value::String("COUPÉ".into()).comparison_key());
}

#[test]
fn value_serde_keeps_scale() {
    let v = normalize_value("155.0", Range::Decimal).unwrap();
    let json = serde_json::to_string(&v).unwrap();
    assert_eq!(json, r#"{"type":"decimal","value":"155.0"}"#);
    assert_eq!(serde_json::from_str::<Value>(&json).unwrap(), v);
}

#[test]
fn detects_one_candidate_per_row() {
    let f = fixture();
    assert_eq!(f.candidates.len(), 3);
    let vettura = &f.candidates[1];
    assert_eq!(vettura.values.len(), 3);
    assert_eq!(vettura.etype, f.etg.etype_by_concept(ConceptId(4)).unwrap());
    assert!(vettura.values.iter().all(|v| v.provenance[0].dataset.as_str() == "d2"));

    let empty = Dataset {
        rows: vec![],
        ..f.datasets[1].clone()
    };
    assert!(detect_entities(&empty, &f.etg).unwrap().is_empty());

    let mut two = f.datasets[1].clone();
    two.rows.push(vec!["AB123CD".into(), "".into(), "fast".into()]);
    let c = detect_entities(&two, &f.etg).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(c[1].values.len(), 2, "empty cells are omitted");
    assert_eq!(c[1].values[0].provenance[0].row, 1);
}

#[test]
fn bad_cells_are_kept_raw_with_a_warning() {
    let f = fixture();
    let mut d = f.datasets[0].clone();
    d.rows[0][1] = "fast".into();
    let c = detect_entities(&d, &f.etg).unwrap();
    let speed = c[0].values.iter().find(|v| v.property == prop(&f, "d1", 1)).unwrap();
    assert_eq!(speed.normalized, None);
    assert_eq!(speed.raw, "fast");
    assert!(speed.warning.is_some());
}

#[test]
fn etype_recognition_picks_the_most_specific() {
    let f = fixture();
    let car = f.etg.etype_by_concept(ConceptId(4)).unwrap();
    let vehicle = f.etg.etype_by_concept(ConceptId(3)).unwrap();
    let both = BTreeSet::from([car, vehicle]);
    assert_eq!(recognize_etype(&both, &f.etg, &f.resource).unwrap(), Some(car));
    assert_eq!(recognize_etype(&BTreeSet::from([vehicle]), &f.etg, &f.resource).unwrap(), Some(vehicle));

    let mut etg = f.etg.clone();
    let speedy = EtypeId(9);
    etg.etypes.insert(
        speedy,
        crate::etg::Etype {
            concept: ConceptId(7),
            name: "speed".into(),
        },
    );
    assert_eq!(recognize_etype(&BTreeSet::from([car, speedy]), &etg, &f.resource).unwrap(), None);
}

#[test]
fn fixture_merges_chain_on_the_plate() {
    let f = fixture();
    let merges = suggest_merges(&f.candidates, &f.etg, &f.resource, &testing::config()).unwrap();
    let ids: Vec<&str> = merges.iter().map(|m| m.id.as_str()).collect();
    assert_eq!(ids, ["g:d1.r0~d2.r0", "g:d1.r0~d3.r0"]);
    assert!(merges.iter().all(|m| m.status == ReviewStatus::Accepted));
    assert!(matches!(&merges[0].evidence, MergeEvidence::Identifying { value, .. } if value == "FP372MK"));
}

#[test]
fn fixture_eg_has_one_entity_with_conflicts() {
    let f = fixture();
    let eg = fixture_eg(&f);
    assert_eq!(eg.entities.len(), 1);
    let e = eg.entities.values().next().unwrap();
    assert_eq!(f.etg.etypes[&e.etype].concept, ConceptId(4));
    assert_eq!(e.members.len(), 3);

    let speeds: Vec<&PropertyValue> = e.values_of(prop(&f, "d1", 1)).collect();
    let shown: Vec<String> = speeds.iter().map(|v| v.normalized.as_ref().unwrap().to_string()).collect();
    assert_eq!(shown, ["150", "158", "155.0"]);
    assert!(speeds.iter().all(|v| v.provenance.len() == 1));

    let dates: Vec<&PropertyValue> = e.values_of(prop(&f, "d1", 4)).collect();
    assert_eq!(dates.len(), 1);
    assert_eq!(dates[0].normalized.as_ref().unwrap().to_string(), "2020-11-25");
    assert_eq!(dates[0].provenance.len(), 2);

    let plates: Vec<&PropertyValue> = e.values_of(prop(&f, "d1", 0)).collect();
    assert_eq!(plates.len(), 1);
    assert_eq!(plates[0].provenance.len(), 2);

    let id = e.id.to_string();
    assert!(f.datasets.iter().all(|d| d.rows.iter().flatten().all(|c| !c.contains(&id))));
}

#[test]
fn no_merges_gives_one_entity_per_row() {
    let f = fixture();
    let eg = assemble(&f, &[], None);
    let ids: Vec<String> = eg.entities.keys().map(ToString::to_string).collect();
    assert_eq!(ids, ["#1", "#2", "#3"]);
}

#[test]
fn reassembly_keeps_ids() {
    let f = fixture();
    let first = assemble(&f, &[], None);
    let again = assemble(&f, &[], Some(&first));
    assert_eq!(first, again);
    let merges = suggest_merges(&f.candidates, &f.etg, &f.resource, &testing::config()).unwrap();
    let merged = assemble(&f, &merges, Some(&first));
    assert_eq!(merged.entities.keys().copied().collect::<Vec<_>>(), [EntityId(1)]);
    assert_eq!(merged.next_id, 4, "ids are never handed out twice");
    let split = assemble(&f, &[], Some(&merged));
    assert_eq!(split.entities.keys().map(|k| k.0).collect::<Vec<_>>(), [1, 4, 5]);
}

#[test]
fn fresh_ids_skip_cell_values() {
    let reserved = reserved_ids(["#1", "see #23x", "#0", "#", "x#4"]);
    assert_eq!(reserved, BTreeSet::from([1, 2, 23, 4]));
    let mut f = fixture();
    f.datasets[0].rows[0][3] = "#1".into();
    let eg = assemble(&f, &[], None);
    assert_eq!(eg.entities.keys().map(|k| k.0).collect::<Vec<_>>(), [2, 3, 4]);
}

#[test]
fn similarity_merges_wait_for_review() {
    let f = fixture();
    let mut d = f.datasets[2].clone();
    d.rows.push(d.rows[0].clone());
    // no VIN, so only the other three columns can be compared
    d.rows[1][0] = String::new();
    d.rows[1][3] = "160".into();
    let candidates = detect_entities(&d, &f.etg).unwrap();
    let merges = suggest_merges(&candidates, &f.etg, &f.resource, &testing::config()).unwrap();
    assert_eq!(merges.len(), 1);
    assert_eq!(merges[0].status, ReviewStatus::Suggested);
    assert!(matches!(merges[0].evidence, MergeEvidence::Similarity { score, shared: 3 } if (score - 2.0 / 3.0).abs() < 1e-12));
    let reserved = BTreeSet::new();
    let err = assemble_eg(
        Assembly {
            candidates: &candidates,
            merges: &merges,
            reseats: &BTreeMap::new(),
            previous: None,
            reserved: &reserved,
        },
        &f.etg,
        &f.resource,
    );
    assert!(matches!(err, Err(EgError::Unresolved(_))));
}

#[test]
fn identical_rows_without_a_key_are_only_suggested() {
    let f = fixture();
    let mut d = f.datasets[2].clone();
    d.rows[0][0] = String::new();
    d.rows.push(d.rows[0].clone());
    let candidates = detect_entities(&d, &f.etg).unwrap();
    let merges = suggest_merges(&candidates, &f.etg, &f.resource, &testing::config()).unwrap();
    assert_eq!(merges.len(), 1);
    assert_eq!(merges[0].status, ReviewStatus::Suggested);
    assert!(matches!(merges[0].evidence, MergeEvidence::Similarity { score, shared: 3 } if score == 1.0));
}

#[test]
fn conflicting_keys_are_never_suggested() {
    let f = fixture();
    let mut d = f.datasets[2].clone();
    d.rows.push(d.rows[0].clone());
    d.rows[1][0] = "ZZ999ZZ".into();
    let candidates = detect_entities(&d, &f.etg).unwrap();
    let merges = suggest_merges(&candidates, &f.etg, &f.resource, &testing::config()).unwrap();
    assert!(merges.is_empty());
}

#[test]
fn different_speeds_alone_are_not_a_merge() {
    let f = fixture();
    let mut a = f.candidates[0].clone();
    a.values.retain(|v| v.property == prop(&f, "d1", 1));
    let mut b = f.candidates[1].clone();
    b.values.retain(|v| v.property == prop(&f, "d1", 1));
    let merges = suggest_merges(&[a, b], &f.etg, &f.resource, &testing::config()).unwrap();
    assert!(merges.is_empty());
}

#[test]
fn reseat_moves_entity_to_an_ancestor() {
    let f = fixture();
    let merges = suggest_merges(&f.candidates, &f.etg, &f.resource, &testing::config()).unwrap();
    let vehicle = f.etg.etype_by_concept(ConceptId(3)).unwrap();
    let car = f.etg.etype_by_concept(ConceptId(4)).unwrap();
    let first = RowRef {
        dataset: DatasetId::new("d1"),
        row: 0,
    };
    let reserved = BTreeSet::new();
    let run = |target| {
        assemble_eg(
            Assembly {
                candidates: &f.candidates,
                merges: &merges,
                reseats: &BTreeMap::from([(first.clone(), target)]),
                previous: None,
                reserved: &reserved,
            },
            &f.etg,
            &f.resource,
        )
    };
    let eg = run(vehicle).unwrap();
    assert_eq!(eg.entities.values().next().unwrap().etype, vehicle);
    assert!(run(car).is_ok());
    let mut etg = f.etg.clone();
    etg.subsumption.clear();
    let bad = assemble_eg(
        Assembly {
            candidates: &f.candidates,
            merges: &merges,
            reseats: &BTreeMap::from([(first.clone(), vehicle)]),
            previous: None,
            reserved: &reserved,
        },
        &etg,
        &f.resource,
    );
    assert!(matches!(bad, Err(EgError::BadReseat { .. })));
}

#[test]
fn jsonld_round_trip_is_byte_identical() {
    let f = fixture();
    let eg = fixture_eg(&f);
    let text = export_jsonld(&eg, &f.etg).unwrap();
    let back = import_jsonld(&text, &f.etg).unwrap();
    assert_eq!(back.entities, eg.entities);
    assert_eq!(export_jsonld(&back, &f.etg).unwrap(), text);

    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let node = &doc["@graph"][0];
    assert_eq!(node["@type"], "urn:strata:c:4");
    let speed = format!("p{}", prop(&f, "d1", 1).0);
    assert_eq!(node[&speed].as_array().unwrap().len(), 3);
    assert_eq!(doc["@context"][&speed]["@id"], "urn:strata:c:7");
}

#[test]
fn empty_eg_exports_context_and_empty_graph() {
    let f = fixture();
    let text = export_jsonld(&Eg::default(), &f.etg).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(doc["@context"].is_object());
    assert_eq!(doc["@graph"], serde_json::json!([]));
    assert!(import_jsonld(&text, &f.etg).unwrap().entities.is_empty());
}

#[test]
fn import_rejects_foreign_documents() {
    let f = fixture();
    assert!(import_jsonld("{}", &f.etg).is_err());
    assert!(import_jsonld("not json", &f.etg).is_err());
    let text = export_jsonld(&fixture_eg(&f), &f.etg).unwrap();
    let tampered = text.replace("urn:strata:c:4", "urn:strata:c:21");
    assert!(import_jsonld(&tampered, &f.etg).is_err());
}

fn tag(s: &str) -> LanguageTag {
    LanguageTag::new(s).unwrap()
}

#[test]
fn renders_in_italian_and_english() {
    let f = fixture();
    let eg = fixture_eg(&f);
    let it = render_eg(&eg, &f.etg, &f.leg, &f.resource, &tag("it")).unwrap();
    let e = &it.entities[0];
    assert_eq!(e.etype.text, "vettura");
    assert!(!e.etype.fallback);
    let labels: Vec<&str> = e.values.iter().map(|v| v.property.text.as_str()).collect();
    assert!(labels.contains(&"velocità"));
    assert!(labels.contains(&"vso:feature"));
    assert_eq!(it.fallbacks, BTreeSet::from([ConceptId(16)]));

    let en = render_eg(&eg, &f.etg, &f.leg, &f.resource, &tag("en")).unwrap();
    assert_eq!(en.entities[0].etype.text, "car");
    let body = en.entities[0].values.iter().find(|v| v.property.fallback).unwrap();
    assert_eq!(body.property.text, "Tipo di corpo");
    assert_eq!(en.fallbacks, BTreeSet::from([ConceptId(24)]));
    let speed = en.entities[0].values.iter().find(|v| v.property.text == "speed").unwrap();
    assert_eq!(speed.values, ["150", "158", "155.0"]);
    assert!(en.to_text().contains("#1\tcar\tspeed\t155.0\n"));
    assert!(en.to_text().contains("Tipo di corpo*"));
}

#[test]
fn renders_namespace_with_fallbacks() {
    let f = fixture();
    let eg = fixture_eg(&f);
    let schema = render_eg(&eg, &f.etg, &f.leg, &f.resource, &tag("ns:schema")).unwrap();
    assert_eq!(schema.entities[0].etype.text, "car");
    assert!(schema.fallbacks.contains(&ConceptId(24)));
    let body = schema.entities[0]
        .values
        .iter()
        .find(|v| v.property.concept == ConceptId(24))
        .unwrap();
    assert_eq!(body.property.text, "Tipo di corpo");
    assert!(body.property.fallback);
    assert!(matches!(
        render_eg(&eg, &f.etg, &f.leg, &f.resource, &tag("fr")),
        Err(EgError::UnsupportedLanguage(_))
    ));
}
