use askg_core::build::{build_batch, build_graph};
use askg_core::cypher::{query, Cell, Params};
use askg_core::graphstore::{bulk_import, snapshot_load, snapshot_save, Value};
use askg_core::ingest::{parse_bytes, render_fixture, ColumnManifest, FixtureSpec};
use askg_core::resolve::{resolve_staging, Resolver};

fn staged(n: usize, seed: u64, rate: f64) -> (askg_core::ingest::StagingSet, askg_core::ingest::FixtureCounts) {
    let f = render_fixture(&FixtureSpec::new(n, seed, rate)).unwrap();
    (parse_bytes(f.csv.as_bytes(), "f.csv", &ColumnManifest::default()).unwrap(), f.counts)
}

#[test]
fn thousand_record_graph_matches_generator_cardinalities() {
    let (set, counts) = staged(1000, 7, 0.2);
    let (g, report) = build_graph(&set, None, &Resolver::default(), 500).unwrap();
    assert_eq!(report.import.relationships_failed, 0);
    assert_eq!(report.import.transactions_failed, 0);
    let stats = g.stats();
    assert_eq!(stats.labels, counts.labels);
    assert_eq!(stats.relationship_types, counts.relationship_types);
    assert_eq!(report.schema.unique_constraints.len(), 2);
    assert!(report.schema.indexes.len() >= 3);
}

#[test]
fn applying_lexical_and_rule_merges_keeps_node_counts() {
    // Node-bearing aliases differ only lexically, so merging them is
    // invisible in the counts.
    let (set, counts) = staged(1000, 7, 0.2);
    let r = Resolver::default();
    let res = resolve_staging(&set, &r, 0.8, true).unwrap();
    let (g, _) = build_graph(&set, Some(&res.entities), &r, 500).unwrap();
    assert_eq!(g.stats().labels, counts.labels);
}

#[test]
fn second_import_creates_nothing() {
    let (set, _) = staged(300, 2, 0.3);
    let r = Resolver::default();
    let (mut g, _) = build_graph(&set, None, &r, 100).unwrap();
    let digest = g.digest();
    let again = bulk_import(&mut g, &build_batch(&set, None, &r).unwrap());
    assert_eq!(again.created(), 0);
    assert_eq!(again.relationships_failed, 0);
    assert_eq!(g.digest(), digest);
}

#[test]
fn snapshot_round_trip_preserves_the_digest() {
    let (set, _) = staged(1000, 7, 0.2);
    let (g, _) = build_graph(&set, None, &Resolver::default(), 500).unwrap();
    let digest = g.digest();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("graph.askg");
    snapshot_save(&g, &path).unwrap();
    assert_eq!(snapshot_load(&path).unwrap().digest(), digest);
}

#[test]
fn aliased_models_display_uniformly() {
    let (set, _) = staged(1000, 7, 0.5);
    let (g, _) = build_graph(&set, None, &Resolver::default(), 500).unwrap();
    let out = query(
        &g,
        "MATCH (a:Aircraft) WHERE a.make = 'Boeing' RETURN DISTINCT a.model AS m ORDER BY m",
        &Params::new(),
    )
    .unwrap();
    let models: Vec<String> = out
        .rows
        .iter()
        .map(|r| match &r[0] {
            Cell::Value(Value::Str(s)) => s.clone(),
            other => panic!("unexpected {other:?}"),
        })
        .collect();
    for m in &models {
        assert!(["737-800", "747-400", "757-200", "767-300", "777-300ER", "787-9"].contains(&m.as_str()), "{m}");
    }
    assert!(!models.is_empty());
}
