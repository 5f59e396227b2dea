//! Aggregates against values pulled straight from the node table.

use askg_core::cypher::{self, Cell, Params};
use askg_core::graphstore::{PropertyGraph, Value};
use askg_testkit::{random_graph, GraphGenOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn raw(g: &PropertyGraph, label: &str, prop: &str) -> (usize, Vec<Value>) {
    let nodes: Vec<_> = g.nodes().filter(|n| n.labels.contains(label)).collect();
    let vals = nodes.iter().filter_map(|n| n.properties.get(prop).cloned()).collect();
    (nodes.len(), vals)
}

fn single(g: &PropertyGraph, text: &str) -> Vec<Cell> {
    let rs = cypher::query(g, text, &Params::new()).expect("valid query");
    assert!(rs.rows.len() <= 1, "{text}");
    rs.rows.into_iter().next().unwrap_or_default()
}

#[test]
fn aggregates_equal_direct_computation() {
    for seed in 0..60 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let g = random_graph(&mut rng, GraphGenOptions::default());
        let (n, ints) = raw(&g, "A", "i");
        let (_, floats) = raw(&g, "A", "w");
        let (_, strs) = raw(&g, "A", "s");
        let row = single(
            &g,
            "MATCH (a:A) RETURN count(*) AS n, count(a.i) AS ni, sum(a.i) AS si, \
             avg(a.w) AS aw, min(a.s) AS lo, max(a.i) AS hi, count(DISTINCT a.s) AS ds",
        );
        if n == 0 {
            assert!(row.is_empty(), "seed {seed}: aggregate over no match has no row");
            continue;
        }
        let ints: Vec<i64> = ints.iter().map(|v| v.as_i64().expect("int property")).collect();
        let floats: Vec<f64> = floats
            .iter()
            .map(|v| match v {
                Value::Float(f) => *f,
                other => panic!("{other:?}"),
            })
            .collect();
        let mut strs: Vec<String> = strs.iter().map(|v| v.render()).collect();
        assert_eq!(row[0], Cell::Value(Value::Int(n as i64)), "seed {seed}");
        assert_eq!(row[1], Cell::Value(Value::Int(ints.len() as i64)));
        assert_eq!(row[2], Cell::Value(Value::Int(ints.iter().sum())));
        let avg = (!floats.is_empty()).then(|| floats.iter().sum::<f64>() / floats.len() as f64);
        match (&row[3], avg) {
            (Cell::Value(Value::Float(got)), Some(want)) => assert!((got - want).abs() < 1e-12),
            (Cell::Null, None) => {}
            other => panic!("seed {seed}: avg {other:?}"),
        }
        strs.sort();
        assert_eq!(
            row[4],
            strs.first().map_or(Cell::Null, |s| Cell::Value(Value::Str(s.clone())))
        );
        assert_eq!(
            row[5],
            ints.iter().max().map_or(Cell::Null, |m| Cell::Value(Value::Int(*m)))
        );
        strs.dedup();
        assert_eq!(row[6], Cell::Value(Value::Int(strs.len() as i64)));
    }
}

#[test]
fn grouped_counts_partition_the_match() {
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let g = random_graph(&mut rng, GraphGenOptions::default());
        let rs = cypher::query(&g, "MATCH (a:B) RETURN a.s AS s, count(*) AS n", &Params::new())
            .expect("valid");
        let total: i64 = rs
            .rows
            .iter()
            .map(|r| r[1].as_value().and_then(Value::as_i64).expect("count"))
            .sum();
        let (n, _) = raw(&g, "B", "s");
        assert_eq!(total as usize, n);
        for (row, prov) in rs.rows.iter().zip(&rs.provenance) {
            assert_eq!(prov.len() as i64, row[1].as_value().and_then(Value::as_i64).unwrap());
        }
    }
}
