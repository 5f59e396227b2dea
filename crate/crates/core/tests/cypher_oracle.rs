//! Engine vs reference interpreter on random graphs and queries.

use askg_core::cypher::{self, Cell, PageRequest, PlanOptions, Query, ResultSet};
use askg_core::graphstore::{GraphSchema, NodeId, PropertyGraph};
use askg_testkit::{oracle_run, random_graph, random_query, GraphGenOptions, OracleResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CASES: u64 = 400;

fn node_slots(q: &Query) -> usize {
    let mut named: Vec<&str> = Vec::new();
    let mut anon = 0;
    for p in &q.patterns {
        for n in p.nodes() {
            match &n.variable {
                Some(v) if !named.contains(&v.as_str()) => named.push(v),
                Some(_) => {}
                None => anon += 1,
            }
        }
    }
    named.len() + anon
}

fn instance(seed: u64) -> (PropertyGraph, Query, cypher::Params) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (q, params) = random_query(&mut rng);
    // Three-slot enumeration is cubic in the node count.
    let max_nodes = if node_slots(&q) >= 3 { 15 } else { 50 };
    let mut g = random_graph(
        &mut rng,
        GraphGenOptions {
            max_nodes,
            ..Default::default()
        },
    );
    if seed % 2 == 0 {
        let schema = GraphSchema::new()
            .index("A", &["i"])
            .index("B", &["s"])
            .index("C", &["d"])
            .index("A", &["i", "s"]);
        g.apply_schema(&schema).expect("no unique constraints");
    }
    (g, q, params)
}

fn keyed(rows: &[Vec<Cell>], prov: &[Vec<NodeId>]) -> Vec<String> {
    let mut out: Vec<String> = rows
        .iter()
        .zip(prov)
        .map(|(r, p)| format!("{r:?} @ {p:?}"))
        .collect();
    out.sort();
    out
}

fn engine(g: &PropertyGraph, q: &Query, p: &cypher::Params, force: bool) -> ResultSet {
    let plan = cypher::plan_with(
        q,
        &g.catalog(),
        PlanOptions {
            force_full_scan: force,
        },
    );
    cypher::run(g, &plan, p).unwrap_or_else(|e| panic!("{q}: {e}"))
}

fn agree(seed: u64, q: &Query, got: &ResultSet, want: &OracleResult) {
    assert_eq!(got.columns, want.columns, "seed {seed}: {q}");
    assert_eq!(
        keyed(&got.rows, &got.provenance),
        keyed(&want.rows, &want.provenance),
        "seed {seed}: {q}"
    );
    if !q.order_by.is_empty() {
        assert_eq!(got.rows, want.rows, "seed {seed}: order differs for {q}");
    }
}

#[test]
fn engine_matches_oracle_on_random_queries() {
    let mut non_empty = 0;
    for seed in 0..CASES {
        let (g, q, params) = instance(seed);
        // Through the text form, so the parser is exercised too.
        let reparsed = cypher::parse(&q.to_string()).unwrap_or_else(|e| panic!("{q}: {e}"));
        let want = oracle_run(&g, &q, &params);
        let got = engine(&g, &reparsed, &params, false);
        agree(seed, &q, &got, &want);
        if !want.rows.is_empty() {
            non_empty += 1;
        }
    }
    println!("{non_empty} of {CASES} cases produced rows");
    assert!(non_empty * 2 >= CASES, "only {non_empty} of {CASES} cases produced rows");
}

#[test]
fn forced_full_scan_changes_nothing() {
    for seed in 0..CASES {
        let (g, q, params) = instance(seed);
        let a = engine(&g, &q, &params, false);
        let b = engine(&g, &q, &params, true);
        assert_eq!(a.columns, b.columns);
        assert_eq!(
            keyed(&a.rows, &a.provenance),
            keyed(&b.rows, &b.provenance),
            "seed {seed}: {q}"
        );
    }
}

#[test]
fn pages_concatenate_to_the_full_result() {
    for seed in 0..150 {
        let (g, q, params) = instance(seed);
        let plan = cypher::plan(&q, &g.catalog());
        let full = cypher::run(&g, &plan, &params).expect("generated queries are valid");
        let size = 1 + (seed as usize % 7);
        let mut rows = Vec::new();
        let mut prov = Vec::new();
        for number in 0.. {
            let page = cypher::execute(&g, &plan, &params, PageRequest { number, size })
                .expect("size within bounds");
            assert!(page.rows.len() <= size);
            let more = page.page.has_more;
            rows.extend(page.rows);
            prov.extend(page.provenance);
            if !more {
                break;
            }
        }
        assert_eq!(
            keyed(&rows, &prov),
            keyed(&full.rows, &full.provenance),
            "seed {seed}: {q}"
        );
        if !q.order_by.is_empty() {
            assert_eq!(rows, full.rows, "seed {seed}: {q}");
        }
    }
}

#[test]
fn printed_queries_reparse_to_the_same_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let (q, _) = random_query(&mut rng);
        let text = q.to_string();
        let back = cypher::parse(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(back, q, "{text}");
        assert_eq!(back.to_string(), text);
    }
}
