//! Tree-walking reference interpreter.
//!
//! Enumerates every assignment of graph nodes to node positions and of
//! relationships to single-hop steps, filters with WHERE, then projects.
//! Variable-length steps are checked against an all-pairs shortest-distance
//! table. No index, adjacency structure or planner output is consulted.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use askg_core::cypher::{AggFunc, BinOp, Cell, Expr, NodeRef, Query, RelDirection, RelRef};
use askg_core::graphstore::{NodeId, PropertyGraph, RelId, Value};
use chrono::NaiveDate;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Vec<Vec<NodeId>>,
}

#[derive(Debug, Clone)]
enum OV {
    Null,
    Val(Value),
    Node(NodeId),
    Rel(RelId),
}

/// One node position: the slot it binds plus its own constraints.
struct Position<'q> {
    slot: usize,
    label: Option<&'q str>,
    props: &'q [(String, Expr)],
}

struct Step<'q> {
    from: usize,
    to: usize,
    rel_type: Option<&'q str>,
    direction: RelDirection,
    hops: Option<(u32, u32)>,
    variable: Option<&'q str>,
}

type Binding = (Vec<NodeId>, Vec<RelId>);

pub fn oracle_run(g: &PropertyGraph, q: &Query, params: &BTreeMap<String, Value>) -> OracleResult {
    let mut node_vars: HashMap<&str, usize> = HashMap::new();
    let mut positions: Vec<Position> = Vec::new();
    let mut steps: Vec<Step> = Vec::new();
    let mut slot_count = 0usize;
    for p in &q.patterns {
        let mut prev = None;
        let mut nodes = vec![&p.start];
        nodes.extend(p.steps.iter().map(|(_, n)| n));
        for (i, np) in nodes.iter().enumerate() {
            let slot = match &np.variable {
                Some(v) => *node_vars.entry(v.as_str()).or_insert_with(|| {
                    slot_count += 1;
                    slot_count - 1
                }),
                None => {
                    slot_count += 1;
                    slot_count - 1
                }
            };
            positions.push(Position {
                slot,
                label: np.label.as_deref(),
                props: &np.properties,
            });
            if let Some(from) = prev {
                let r = &p.steps[i - 1].0;
                steps.push(Step {
                    from,
                    to: slot,
                    rel_type: r.rel_type.as_deref(),
                    direction: r.direction,
                    hops: r.hops.map(|h| (h.min, h.max)),
                    variable: r.variable.as_deref(),
                });
            }
            prev = Some(slot);
        }
    }
    let single: Vec<usize> = (0..steps.len()).filter(|&i| steps[i].hops.is_none()).collect();
    let rel_vars: HashMap<&str, usize> = single
        .iter()
        .enumerate()
        .filter_map(|(k, &i)| steps[i].variable.map(|v| (v, k)))
        .collect();

    let all_nodes: Vec<NodeId> = g.nodes().map(|n| n.id).collect();
    let mut dist_tables: HashMap<(Option<&str>, u8), DistTable> = HashMap::new();

    // Node assignments, checking each position's own constraints.
    let mut node_assignments: Vec<Vec<NodeId>> = vec![Vec::new()];
    for slot in 0..slot_count {
        let mut next = Vec::new();
        for partial in &node_assignments {
            for &n in &all_nodes {
                let ok = positions
                    .iter()
                    .filter(|p| p.slot == slot)
                    .all(|p| position_matches(g, p, n, params));
                if ok {
                    let mut a = partial.clone();
                    a.push(n);
                    next.push(a);
                }
            }
        }
        node_assignments = next;
    }

    let mut bindings: Vec<Binding> = Vec::new();
    for nodes in node_assignments {
        let var_ok = steps.iter().filter(|s| s.hops.is_some()).all(|s| {
            let (min, max) = s.hops.expect("filtered");
            let key = (s.rel_type, direction_code(s.direction));
            let table = dist_tables
                .entry(key)
                .or_insert_with(|| DistTable::build(g, s.rel_type, s.direction));
            match table.get(nodes[s.from], nodes[s.to]) {
                Some(d) => d >= min as usize && d <= max as usize,
                None => false,
            }
        });
        if !var_ok {
            continue;
        }
        let mut rel_assignments: Vec<Vec<RelId>> = vec![Vec::new()];
        for &si in &single {
            let s = &steps[si];
            let (u, v) = (nodes[s.from], nodes[s.to]);
            let mut next = Vec::new();
            for partial in &rel_assignments {
                for r in g.relationships() {
                    if s.rel_type.is_some_and(|t| t != r.rel_type) || partial.contains(&r.id) {
                        continue;
                    }
                    let fits = match s.direction {
                        RelDirection::Out => r.source == u && r.target == v,
                        RelDirection::In => r.source == v && r.target == u,
                        RelDirection::Undirected => {
                            (r.source == u && r.target == v) || (r.source == v && r.target == u)
                        }
                    };
                    if fits {
                        let mut a = partial.clone();
                        a.push(r.id);
                        next.push(a);
                    }
                }
            }
            rel_assignments = next;
        }
        for rels in rel_assignments {
            bindings.push((nodes.clone(), rels));
        }
    }

    let env = Env {
        g,
        params,
        node_vars: &node_vars,
        rel_vars: &rel_vars,
    };
    bindings.retain(|b| match &q.where_clause {
        Some(w) => truthy(&env.eval(w, b)),
        None => true,
    });

    let columns: Vec<String> = q.returns.iter().map(|r| r.column_name()).collect();
    let aggregating = q.returns.iter().any(|r| matches!(r.expr, Expr::Agg { .. }));

    let mut rows: Vec<(Vec<OV>, Vec<NodeId>)> = Vec::new();
    if aggregating {
        let mut groups: Vec<(Vec<OV>, Vec<&Binding>)> = Vec::new();
        for b in &bindings {
            let key: Vec<OV> = q
                .returns
                .iter()
                .filter(|r| !matches!(r.expr, Expr::Agg { .. }))
                .map(|r| env.eval(&r.expr, b))
                .collect();
            match groups.iter_mut().find(|(k, _)| same_list(k, &key)) {
                Some((_, members)) => members.push(b),
                None => groups.push((key, vec![b])),
            }
        }
        for (key, members) in groups {
            let mut keys = key.into_iter();
            let row: Vec<OV> = q
                .returns
                .iter()
                .map(|r| match &r.expr {
                    Expr::Agg { func, distinct, arg } => {
                        let values: Vec<OV> = match arg {
                            None => members.iter().map(|_| OV::Val(Value::Bool(true))).collect(),
                            Some(a) => members.iter().map(|b| env.eval(a, b)).collect(),
                        };
                        aggregate(*func, *distinct, arg.is_none(), values)
                    }
                    _ => keys.next().expect("one key per grouping item"),
                })
                .collect();
            let prov = union(members.iter().map(|b| provenance(b)));
            rows.push((row, prov));
        }
    } else {
        for b in &bindings {
            let row: Vec<OV> = q.returns.iter().map(|r| env.eval(&r.expr, b)).collect();
            let prov = provenance(b);
            if q.distinct {
                if let Some(existing) = rows.iter_mut().find(|(r, _)| same_list(r, &row)) {
                    existing.1 = union([existing.1.clone(), prov]);
                    continue;
                }
            }
            rows.push((row, prov));
        }
    }

    if !q.order_by.is_empty() {
        // Sort keys are return columns whenever the sort expression names one.
        let key_of = |row: &Vec<OV>, e: &Expr| -> Option<OV> {
            q.returns
                .iter()
                .position(|r| {
                    r.alias.as_deref().is_some_and(|a| matches!(e, Expr::Var(v) if v == a))
                        || &r.expr == e
                })
                .map(|i| row[i].clone())
        };
        let mut keyed: Vec<(Vec<Cell>, Vec<OV>, Vec<NodeId>)> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (row, prov))| {
                let keys = q
                    .order_by
                    .iter()
                    .map(|s| {
                        let v = key_of(&row, &s.expr).unwrap_or_else(|| {
                            env.eval(&s.expr, &bindings[i])
                        });
                        to_cell(g, &v)
                    })
                    .collect();
                (keys, row, prov)
            })
            .collect();
        keyed.sort_by(|a, b| {
            for (i, s) in q.order_by.iter().enumerate() {
                let mut o = cell_order(&a.0[i], &b.0[i]);
                if s.descending {
                    o = o.reverse();
                }
                if o != Ordering::Equal {
                    return o;
                }
            }
            a.2.cmp(&b.2)
        });
        rows = keyed.into_iter().map(|(_, r, p)| (r, p)).collect();
    }

    let skip = q.skip.unwrap_or(0) as usize;
    let rows: Vec<(Vec<OV>, Vec<NodeId>)> = rows
        .into_iter()
        .skip(skip)
        .take(q.limit.map_or(usize::MAX, |l| l as usize))
        .collect();
    OracleResult {
        columns,
        rows: rows
            .iter()
            .map(|(r, _)| r.iter().map(|v| to_cell(g, v)).collect())
            .collect(),
        provenance: rows.into_iter().map(|(_, p)| p).collect(),
    }
}

fn direction_code(d: RelDirection) -> u8 {
    match d {
        RelDirection::Out => 0,
        RelDirection::In => 1,
        RelDirection::Undirected => 2,
    }
}

fn position_matches(
    g: &PropertyGraph,
    p: &Position,
    n: NodeId,
    params: &BTreeMap<String, Value>,
) -> bool {
    let node = g.node(n).expect("enumerated from the graph");
    if p.label.is_some_and(|l| !node.labels.contains(l)) {
        return false;
    }
    p.props.iter().all(|(k, e)| {
        let want = match e {
            Expr::Literal(l) => OV::Val(l.to_value()),
            Expr::Param(name) => OV::Val(params[name].clone()),
            other => panic!("inline property must be a literal or parameter: {other:?}"),
        };
        let have = node.properties.get(k).map_or(OV::Null, |v| OV::Val(v.clone()));
        compare(BinOp::Eq, &have, &want)
    })
}

fn provenance(b: &Binding) -> Vec<NodeId> {
    let mut p = b.0.clone();
    p.sort();
    p.dedup();
    p
}

fn union(parts: impl IntoIterator<Item = Vec<NodeId>>) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = parts.into_iter().flatten().collect();
    out.sort();
    out.dedup();
    out
}

struct Env<'a> {
    g: &'a PropertyGraph,
    params: &'a BTreeMap<String, Value>,
    node_vars: &'a HashMap<&'a str, usize>,
    rel_vars: &'a HashMap<&'a str, usize>,
}

impl Env<'_> {
    fn bound(&self, v: &str, b: &Binding) -> OV {
        if let Some(&s) = self.node_vars.get(v) {
            return OV::Node(b.0[s]);
        }
        if let Some(&s) = self.rel_vars.get(v) {
            return OV::Rel(b.1[s]);
        }
        panic!("unbound variable {v}")
    }

    fn eval(&self, e: &Expr, b: &Binding) -> OV {
        match e {
            Expr::Literal(l) => OV::Val(l.to_value()),
            Expr::Param(p) => OV::Val(self.params[p].clone()),
            Expr::Var(v) => self.bound(v, b),
            Expr::Prop(v, k) => {
                let props = match self.bound(v, b) {
                    OV::Node(n) => &self.g.node(n).expect("bound node").properties,
                    OV::Rel(r) => &self.g.relationship(r).expect("bound rel").properties,
                    _ => unreachable!(),
                };
                props.get(k).map_or(OV::Null, |x| OV::Val(x.clone()))
            }
            Expr::Binary(l, op, r) => {
                OV::Val(Value::Bool(compare(*op, &self.eval(l, b), &self.eval(r, b))))
            }
            Expr::And(l, r) => {
                OV::Val(Value::Bool(truthy(&self.eval(l, b)) && truthy(&self.eval(r, b))))
            }
            Expr::Or(l, r) => {
                OV::Val(Value::Bool(truthy(&self.eval(l, b)) || truthy(&self.eval(r, b))))
            }
            Expr::Not(x) => OV::Val(Value::Bool(!truthy(&self.eval(x, b)))),
            Expr::Agg { .. } => panic!("aggregate outside RETURN"),
        }
    }
}

fn truthy(v: &OV) -> bool {
    matches!(v, OV::Val(Value::Bool(true)))
}

fn iso(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// Orders comparable scalars; `None` for incompatible types.
fn scalar_order(a: &Value, b: &Value) -> Option<Ordering> {
    use Value::*;
    match (a, b) {
        (Int(x), Int(y)) => Some(x.cmp(y)),
        (Int(x), Float(y)) => (*x as f64).partial_cmp(y),
        (Float(x), Int(y)) => x.partial_cmp(&(*y as f64)),
        (Float(x), Float(y)) => x.partial_cmp(y),
        (Bool(x), Bool(y)) => Some(x.cmp(y)),
        (Str(x), Str(y)) => Some(x.cmp(y)),
        (Date(x), Date(y)) => Some(x.cmp(y)),
        (Date(x), Str(y)) => iso(y).map(|y| x.cmp(&y)),
        (Str(x), Date(y)) => iso(x).map(|x| x.cmp(y)),
        _ => None,
    }
}

fn compare(op: BinOp, l: &OV, r: &OV) -> bool {
    match (l, r) {
        (OV::Null, _) | (_, OV::Null) => false,
        (OV::Node(a), OV::Node(b)) => match op {
            BinOp::Eq => a == b,
            BinOp::Ne => a != b,
            _ => false,
        },
        (OV::Rel(a), OV::Rel(b)) => match op {
            BinOp::Eq => a == b,
            BinOp::Ne => a != b,
            _ => false,
        },
        (OV::Val(a), OV::Val(b)) => match op {
            BinOp::Contains => matches!((a, b), (Value::Str(x), Value::Str(y)) if x.contains(y.as_str())),
            BinOp::StartsWith => {
                matches!((a, b), (Value::Str(x), Value::Str(y)) if x.starts_with(y.as_str()))
            }
            _ => match scalar_order(a, b) {
                None => false,
                Some(o) => match op {
                    BinOp::Eq => o.is_eq(),
                    BinOp::Ne => o.is_ne(),
                    BinOp::Lt => o.is_lt(),
                    BinOp::Le => o.is_le(),
                    BinOp::Gt => o.is_gt(),
                    BinOp::Ge => o.is_ge(),
                    BinOp::Contains | BinOp::StartsWith => unreachable!(),
                },
            },
        },
        _ => false,
    }
}

/// Exact identity used for grouping and DISTINCT: an integer never equals
/// a float, and zero has one sign.
fn same(a: &OV, b: &OV) -> bool {
    use Value::*;
    match (a, b) {
        (OV::Null, OV::Null) => true,
        (OV::Node(x), OV::Node(y)) => x == y,
        (OV::Rel(x), OV::Rel(y)) => x == y,
        (OV::Val(x), OV::Val(y)) => match (x, y) {
            (Float(p), Float(q)) => p == q || (p.is_nan() && q.is_nan() && p.to_bits() == q.to_bits()),
            (Int(p), Int(q)) => p == q,
            (Bool(p), Bool(q)) => p == q,
            (Str(p), Str(q)) => p == q,
            (Date(p), Date(q)) => p == q,
            _ => false,
        },
        _ => false,
    }
}

fn same_list(a: &[OV], b: &[OV]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| same(x, y))
}

fn rank(c: &Cell) -> u8 {
    match c {
        Cell::Value(Value::Bool(_)) => 0,
        Cell::Value(Value::Int(_)) | Cell::Value(Value::Float(_)) => 1,
        Cell::Value(Value::Date(_)) => 2,
        Cell::Value(Value::Str(_)) => 3,
        Cell::Node(_) => 4,
        Cell::Rel(_) => 5,
        Cell::Null => 6,
    }
}

fn cell_order(a: &Cell, b: &Cell) -> Ordering {
    rank(a).cmp(&rank(b)).then_with(|| match (a, b) {
        (Cell::Value(x), Cell::Value(y)) => {
            let base = match (x, y) {
                (Value::Float(p), Value::Float(q)) => p.total_cmp(q),
                _ => scalar_order(x, y).unwrap_or(Ordering::Equal),
            };
            let int_first = match (x, y) {
                (Value::Int(_), Value::Float(_)) => Ordering::Less,
                (Value::Float(_), Value::Int(_)) => Ordering::Greater,
                _ => Ordering::Equal,
            };
            base.then(int_first)
        }
        (Cell::Node(x), Cell::Node(y)) => x.id.cmp(&y.id),
        (Cell::Rel(x), Cell::Rel(y)) => x.id.cmp(&y.id),
        _ => Ordering::Equal,
    })
}

fn to_cell(g: &PropertyGraph, v: &OV) -> Cell {
    match v {
        OV::Null => Cell::Null,
        OV::Val(x) => Cell::Value(x.clone()),
        OV::Node(id) => {
            let n = g.node(*id).expect("bound node");
            Cell::Node(NodeRef {
                id: n.id,
                labels: n.labels.iter().cloned().collect(),
                properties: n.properties.clone(),
            })
        }
        OV::Rel(id) => {
            let r = g.relationship(*id).expect("bound rel");
            Cell::Rel(RelRef {
                id: r.id,
                rel_type: r.rel_type.clone(),
                source: r.source,
                target: r.target,
                properties: r.properties.clone(),
            })
        }
    }
}

fn aggregate(func: AggFunc, distinct: bool, star: bool, values: Vec<OV>) -> OV {
    if star {
        return OV::Val(Value::Int(values.len() as i64));
    }
    let mut kept: Vec<OV> = Vec::new();
    for v in values {
        if matches!(v, OV::Null) {
            continue;
        }
        if distinct && kept.iter().any(|k| same(k, &v)) {
            continue;
        }
        kept.push(v);
    }
    match func {
        AggFunc::Count => OV::Val(Value::Int(kept.len() as i64)),
        AggFunc::Sum | AggFunc::Avg => {
            let mut int_sum: i64 = 0;
            let mut floats: Vec<f64> = Vec::new();
            for v in &kept {
                match v {
                    OV::Val(Value::Int(i)) => int_sum += i,
                    OV::Val(Value::Float(f)) => floats.push(*f),
                    _ => {}
                }
            }
            let count = kept
                .iter()
                .filter(|v| matches!(v, OV::Val(Value::Int(_) | Value::Float(_))))
                .count();
            let total = || {
                let mut fs = floats.clone();
                fs.sort_by(f64::total_cmp);
                int_sum as f64 + fs.iter().sum::<f64>()
            };
            match func {
                AggFunc::Sum if floats.is_empty() => OV::Val(Value::Int(int_sum)),
                AggFunc::Sum => OV::Val(Value::Float(total())),
                _ if count == 0 => OV::Null,
                _ => OV::Val(Value::Float(total() / count as f64)),
            }
        }
        AggFunc::Min | AggFunc::Max => {
            // Ranking needs only ids for nodes and relationships.
            let cell = |v: &OV| match v {
                OV::Val(x) => Cell::Value(x.clone()),
                OV::Node(id) => Cell::Node(NodeRef {
                    id: *id,
                    labels: Vec::new(),
                    properties: Default::default(),
                }),
                OV::Rel(id) => Cell::Rel(RelRef {
                    id: *id,
                    rel_type: String::new(),
                    source: NodeId(0),
                    target: NodeId(0),
                    properties: Default::default(),
                }),
                OV::Null => Cell::Null,
            };
            let mut best: Option<&OV> = None;
            for v in &kept {
                best = match best {
                    None => Some(v),
                    Some(b) => {
                        let o = cell_order(&cell(v), &cell(b));
                        let better = if func == AggFunc::Min { o.is_lt() } else { o.is_gt() };
                        Some(if better { v } else { b })
                    }
                };
            }
            best.cloned().unwrap_or(OV::Null)
        }
    }
}

/// All-pairs shortest hop distances (Floyd–Warshall).
struct DistTable {
    index: HashMap<NodeId, usize>,
    dist: Vec<Vec<Option<usize>>>,
}

impl DistTable {
    fn build(g: &PropertyGraph, rel_type: Option<&str>, direction: RelDirection) -> Self {
        let ids: Vec<NodeId> = g.nodes().map(|n| n.id).collect();
        let index: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let n = ids.len();
        let mut dist = vec![vec![None; n]; n];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = Some(0);
        }
        for r in g.relationships() {
            if rel_type.is_some_and(|t| t != r.rel_type) {
                continue;
            }
            let (s, t) = (index[&r.source], index[&r.target]);
            let mut link = |a: usize, b: usize| {
                if dist[a][b].is_none() {
                    dist[a][b] = Some(1);
                }
            };
            match direction {
                RelDirection::Out => link(s, t),
                RelDirection::In => link(t, s),
                RelDirection::Undirected => {
                    link(s, t);
                    link(t, s);
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                let Some(ik) = dist[i][k] else { continue };
                for j in 0..n {
                    if let Some(kj) = dist[k][j] {
                        if dist[i][j].is_none_or(|d| ik + kj < d) {
                            dist[i][j] = Some(ik + kj);
                        }
                    }
                }
            }
        }
        Self { index, dist }
    }

    fn get(&self, a: NodeId, b: NodeId) -> Option<usize> {
        self.dist[self.index[&a]][self.index[&b]]
    }
}
