use askg_core::graphstore::{NodeId, Properties, PropertyGraph, Value};
use chrono::NaiveDate;
use rand::Rng;

pub const LABELS: &[&str] = &["A", "B", "C"];
pub const REL_TYPES: &[&str] = &["R", "S"];
pub const STRINGS: &[&str] = &["alpha", "beta", "gamma", "alphabet", "be", ""];

#[derive(Debug, Clone, Copy)]
pub struct GraphGenOptions {
    pub max_nodes: usize,
    /// Expected relationships per node.
    pub edge_factor: f64,
}

impl Default for GraphGenOptions {
    fn default() -> Self {
        Self {
            max_nodes: 50,
            edge_factor: 2.0,
        }
    }
}

/// Schemaless graph with properties `i` (int), `s` (string), `b` (bool),
/// `w` (float, multiples of 0.5) and `d` (date), each present with
/// probability 0.8. Parallel edges and self-loops occur.
pub fn random_graph(rng: &mut impl Rng, options: GraphGenOptions) -> PropertyGraph {
    let mut g = PropertyGraph::new();
    let n = if rng.random_bool(0.05) {
        0
    } else {
        rng.random_range(options.max_nodes.div_ceil(3)..=options.max_nodes)
    };
    let mut ids: Vec<NodeId> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut labels = vec![LABELS[rng.random_range(0..LABELS.len())]];
        if rng.random_bool(0.2) {
            let extra = LABELS[rng.random_range(0..LABELS.len())];
            if !labels.contains(&extra) {
                labels.push(extra);
            }
        }
        let mut p = Properties::new();
        if rng.random_bool(0.8) {
            p.insert("i".into(), Value::Int(rng.random_range(-3..=6)));
        }
        if rng.random_bool(0.8) {
            p.insert(
                "s".into(),
                Value::Str(STRINGS[rng.random_range(0..STRINGS.len())].into()),
            );
        }
        if rng.random_bool(0.8) {
            p.insert("b".into(), Value::Bool(rng.random_bool(0.5)));
        }
        if rng.random_bool(0.8) {
            p.insert("w".into(), Value::Float(rng.random_range(-4..=8) as f64 * 0.5));
        }
        if rng.random_bool(0.8) {
            let d = NaiveDate::from_ymd_opt(2000 + rng.random_range(0..4), rng.random_range(1..=12), 1)
                .expect("valid date");
            p.insert("d".into(), Value::Date(d));
        }
        ids.push(g.create_node(labels, p).expect("labels are non-empty"));
    }
    if !ids.is_empty() {
        let m = (n as f64 * options.edge_factor).round() as usize;
        for _ in 0..m {
            let a = ids[rng.random_range(0..ids.len())];
            let b = ids[rng.random_range(0..ids.len())];
            let t = REL_TYPES[rng.random_range(0..REL_TYPES.len())];
            g.create_relationship(t, a, b, Properties::new())
                .expect("schemaless graph accepts any relationship");
        }
    }
    g
}
