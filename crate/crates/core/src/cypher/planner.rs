//! Access-path selection and schema validation.
//!
//! Each path pattern is started from one anchor node. The anchor is the
//! node with the cheapest access: a variable bound by an earlier pattern,
//! then an index lookup, then a label scan, then a full scan. Patterns are
//! joined greedily in that same cost order, ties broken by source order.
//! Every WHERE conjunct stays a filter, including those an index lookup
//! already satisfies, so the access path never changes results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use super::ast::{BinOp, Expr, NodePattern, Query};
use crate::graphstore::{GraphSchema, IndexDef};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlanOptions {
    /// Ignore indexes and labels when choosing anchors.
    pub force_full_scan: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AccessPath {
    /// Probe `index` with `values`, given in the index's property order.
    IndexLookup { index: IndexDef, values: Vec<Expr> },
    LabelScan { label: String },
    FullScan,
    Bound { variable: String },
}

impl AccessPath {
    fn rank(&self) -> u8 {
        match self {
            AccessPath::Bound { .. } => 0,
            AccessPath::IndexLookup { .. } => 1,
            AccessPath::LabelScan { .. } => 2,
            AccessPath::FullScan => 3,
        }
    }
}

impl fmt::Display for AccessPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccessPath::IndexLookup { index, values } => {
                let vals: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                write!(f, "IndexLookup {index} = ({})", vals.join(", "))
            }
            AccessPath::LabelScan { label } => write!(f, "LabelScan :{label}"),
            AccessPath::FullScan => f.write_str("FullScan"),
            AccessPath::Bound { variable } => write!(f, "Bound {variable}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternPlan {
    /// Index into `Query::patterns`.
    pub pattern: usize,
    /// Node position within the pattern the match starts from.
    pub anchor: usize,
    pub access: AccessPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryPlan {
    pub query: Query,
    /// In join order; covers every pattern exactly once.
    pub patterns: Vec<PatternPlan>,
    /// WHERE conjuncts, evaluated as soon as their variables are bound.
    pub filters: Vec<Expr>,
    pub warnings: Vec<String>,
    /// An unknown label or relationship type makes every match empty.
    pub empty_result: bool,
}

pub fn plan(query: &Query, schema: &GraphSchema) -> QueryPlan {
    plan_with(query, schema, PlanOptions::default())
}

pub fn plan_with(query: &Query, schema: &GraphSchema, options: PlanOptions) -> QueryPlan {
    let mut warnings = Warnings::default();
    let mut empty_result = false;

    for p in &query.patterns {
        for n in p.nodes() {
            if let Some(l) = &n.label {
                if !schema.has_label(l) {
                    warnings.push(format!("unknown label :{l}"));
                    empty_result = true;
                }
            }
        }
        for (r, _) in &p.steps {
            if let Some(t) = &r.rel_type {
                if !schema.has_relationship_type(t) {
                    warnings.push(format!("unknown relationship type :{t}"));
                    empty_result = true;
                }
            }
        }
    }

    let labels = variable_labels(query);
    check_properties(query, schema, &labels, &mut warnings);

    let where_eq = where_equalities(query);
    let filters: Vec<Expr> = query
        .where_clause
        .as_ref()
        .map(|w| w.conjuncts().into_iter().cloned().collect())
        .unwrap_or_default();

    // Missing-index detection over every labelled node position.
    for p in &query.patterns {
        for n in p.nodes() {
            let Some(label) = node_label(n, &labels) else { continue };
            if !schema.has_label(label) {
                continue;
            }
            let eqs = node_equalities(n, &where_eq, query);
            let bound: BTreeSet<&str> = eqs.keys().map(String::as_str).collect();
            for prop in &bound {
                if !schema.has_property(label, prop) {
                    continue;
                }
                let covered = schema.indexes_on(label).any(|i| {
                    i.properties.iter().any(|ip| ip == prop)
                        && i.properties.iter().all(|ip| bound.contains(ip.as_str()))
                });
                if !covered {
                    warnings.push(format!("missing index on :{label}({prop})"));
                }
            }
        }
    }

    let mut remaining: Vec<usize> = (0..query.patterns.len()).collect();
    let mut bound_vars: BTreeSet<String> = BTreeSet::new();
    let mut patterns = Vec::new();
    while !remaining.is_empty() {
        let mut best: Option<(u8, usize, PatternPlan)> = None;
        for (slot, &pi) in remaining.iter().enumerate() {
            let (anchor, access) =
                choose_anchor(query, pi, schema, &labels, &where_eq, &bound_vars, options);
            let rank = access.rank();
            if best.as_ref().is_none_or(|(r, _, _)| rank < *r) {
                best = Some((
                    rank,
                    slot,
                    PatternPlan {
                        pattern: pi,
                        anchor,
                        access,
                    },
                ));
            }
        }
        let (_, slot, pp) = best.expect("remaining is non-empty");
        remaining.remove(slot);
        bound_vars.extend(pattern_variables(query, pp.pattern));
        patterns.push(pp);
    }

    QueryPlan {
        query: query.clone(),
        patterns,
        filters,
        warnings: warnings.0,
        empty_result,
    }
}

#[derive(Default)]
struct Warnings(Vec<String>);

impl Warnings {
    fn push(&mut self, w: String) {
        if !self.0.contains(&w) {
            self.0.push(w);
        }
    }
}

fn pattern_variables(query: &Query, pi: usize) -> Vec<String> {
    let p = &query.patterns[pi];
    let mut out: Vec<String> = p.nodes().filter_map(|n| n.variable.clone()).collect();
    out.extend(p.steps.iter().filter_map(|(r, _)| r.variable.clone()));
    out
}

/// First declared label for each node variable across all occurrences.
fn variable_labels(query: &Query) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for p in &query.patterns {
        for n in p.nodes() {
            if let (Some(v), Some(l)) = (&n.variable, &n.label) {
                out.entry(v.clone()).or_insert_with(|| l.clone());
            }
        }
    }
    out
}

fn node_label<'a>(n: &'a NodePattern, labels: &'a BTreeMap<String, String>) -> Option<&'a str> {
    n.label
        .as_deref()
        .or_else(|| n.variable.as_ref().and_then(|v| labels.get(v)).map(String::as_str))
}

fn is_constant(e: &Expr) -> bool {
    matches!(e, Expr::Literal(_) | Expr::Param(_))
}

/// `var.prop = constant` conjuncts of WHERE, per variable.
fn where_equalities(query: &Query) -> BTreeMap<String, Vec<(String, Expr)>> {
    let mut out: BTreeMap<String, Vec<(String, Expr)>> = BTreeMap::new();
    let Some(w) = &query.where_clause else {
        return out;
    };
    for c in w.conjuncts() {
        if let Expr::Binary(l, BinOp::Eq, r) = c {
            let pair = match (l.as_ref(), r.as_ref()) {
                (Expr::Prop(v, k), val) if is_constant(val) => Some((v, k, val)),
                (val, Expr::Prop(v, k)) if is_constant(val) => Some((v, k, val)),
                _ => None,
            };
            if let Some((v, k, val)) = pair {
                out.entry(v.clone())
                    .or_default()
                    .push((k.clone(), val.clone()));
            }
        }
    }
    out
}

/// Equality constraints known for a node position: its own inline map,
/// inline maps of other occurrences of the same variable, and WHERE
/// equalities. The first constant seen for a property wins.
fn node_equalities(
    n: &NodePattern,
    where_eq: &BTreeMap<String, Vec<(String, Expr)>>,
    query: &Query,
) -> BTreeMap<String, Expr> {
    let mut out = BTreeMap::new();
    for (k, v) in &n.properties {
        out.entry(k.clone()).or_insert_with(|| v.clone());
    }
    if let Some(var) = &n.variable {
        for p in &query.patterns {
            for other in p.nodes() {
                if other.variable.as_ref() == Some(var) {
                    for (k, v) in &other.properties {
                        out.entry(k.clone()).or_insert_with(|| v.clone());
                    }
                }
            }
        }
        for (k, v) in where_eq.get(var).into_iter().flatten() {
            out.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }
    out
}

fn choose_anchor(
    query: &Query,
    pi: usize,
    schema: &GraphSchema,
    labels: &BTreeMap<String, String>,
    where_eq: &BTreeMap<String, Vec<(String, Expr)>>,
    bound_vars: &BTreeSet<String>,
    options: PlanOptions,
) -> (usize, AccessPath) {
    let p = &query.patterns[pi];
    let mut best: Option<(usize, AccessPath)> = None;
    for (i, n) in p.nodes().enumerate() {
        let access = node_access(n, schema, labels, where_eq, query, bound_vars, options);
        if best.as_ref().is_none_or(|(_, a)| access.rank() < a.rank()) {
            best = Some((i, access));
        }
    }
    best.expect("a pattern has at least one node")
}

fn node_access(
    n: &NodePattern,
    schema: &GraphSchema,
    labels: &BTreeMap<String, String>,
    where_eq: &BTreeMap<String, Vec<(String, Expr)>>,
    query: &Query,
    bound_vars: &BTreeSet<String>,
    options: PlanOptions,
) -> AccessPath {
    if let Some(v) = &n.variable {
        if bound_vars.contains(v) {
            return AccessPath::Bound {
                variable: v.clone(),
            };
        }
    }
    if options.force_full_scan {
        return AccessPath::FullScan;
    }
    let Some(label) = node_label(n, labels) else {
        return AccessPath::FullScan;
    };
    let eqs = node_equalities(n, where_eq, query);
    let best_index = schema
        .indexes_on(label)
        .filter(|i| i.properties.iter().all(|p| eqs.contains_key(p)))
        .fold(None::<&IndexDef>, |acc, i| match acc {
            Some(a) if a.properties.len() >= i.properties.len() => Some(a),
            _ => Some(i),
        });
    match best_index {
        Some(index) => AccessPath::IndexLookup {
            index: index.clone(),
            values: index.properties.iter().map(|p| eqs[p].clone()).collect(),
        },
        None => AccessPath::LabelScan {
            label: label.to_string(),
        },
    }
}

fn check_properties(
    query: &Query,
    schema: &GraphSchema,
    labels: &BTreeMap<String, String>,
    warnings: &mut Warnings,
) {
    let rel_vars: BTreeSet<&str> = query
        .patterns
        .iter()
        .flat_map(|p| p.steps.iter().filter_map(|(r, _)| r.variable.as_deref()))
        .collect();
    let mut check = |var: Option<&str>, label: Option<&str>, prop: &str| {
        if var.is_some_and(|v| rel_vars.contains(v)) {
            return;
        }
        match label {
            Some(l) if schema.has_label(l) => {
                if !schema.has_property(l, prop) {
                    warnings.push(format!("unknown property :{l}({prop})"));
                }
            }
            Some(_) => {}
            None => {
                if !schema.knows_property(prop) {
                    warnings.push(format!("unknown property `{prop}`"));
                }
            }
        }
    };
    for p in &query.patterns {
        for n in p.nodes() {
            for (k, _) in &n.properties {
                check(n.variable.as_deref(), node_label(n, labels), k);
            }
        }
    }
    let mut exprs: Vec<&Expr> = Vec::new();
    exprs.extend(query.where_clause.iter());
    exprs.extend(query.returns.iter().map(|r| &r.expr));
    exprs.extend(query.order_by.iter().map(|s| &s.expr));
    let mut props = Vec::new();
    for e in exprs {
        collect_props(e, &mut props);
    }
    for (v, k) in props {
        check(Some(v), labels.get(v).map(String::as_str), k);
    }
}

fn collect_props<'a>(e: &'a Expr, out: &mut Vec<(&'a str, &'a str)>) {
    match e {
        Expr::Prop(v, k) => out.push((v, k)),
        Expr::Binary(l, _, r) | Expr::And(l, r) | Expr::Or(l, r) => {
            collect_props(l, out);
            collect_props(r, out);
        }
        Expr::Not(x) => collect_props(x, out),
        Expr::Agg { arg: Some(a), .. } => collect_props(a, out),
        _ => {}
    }
}

impl QueryPlan {
    /// Stable text rendering.
    pub fn render(&self) -> String {
        let q = &self.query;
        let mut s = String::new();
        let _ = writeln!(s, "Plan");
        for (step, pp) in self.patterns.iter().enumerate() {
            let p = &q.patterns[pp.pattern];
            let _ = writeln!(s, "  {}. Match {p}", step + 1);
            let anchor = p.node(pp.anchor);
            let _ = writeln!(s, "     anchor {anchor} via {}", pp.access);
            for i in pp.anchor..p.steps.len() {
                let (r, n) = &p.steps[i];
                let _ = writeln!(s, "     expand {r}{n}");
            }
            for i in (0..pp.anchor).rev() {
                let (r, _) = &p.steps[i];
                let _ = writeln!(s, "     expand {} {r}", p.node(i));
            }
        }
        for f in &self.filters {
            let _ = writeln!(s, "  Filter {f}");
        }
        let items: Vec<String> = q
            .returns
            .iter()
            .map(|r| match &r.alias {
                Some(a) => format!("{} AS {a}", r.expr),
                None => r.expr.to_string(),
            })
            .collect();
        let head = if q.is_aggregating() {
            "Aggregate"
        } else if q.distinct {
            "Distinct"
        } else {
            "Project"
        };
        let _ = writeln!(s, "  {head} {}", items.join(", "));
        if !q.order_by.is_empty() {
            let keys: Vec<String> = q
                .order_by
                .iter()
                .map(|o| format!("{}{}", o.expr, if o.descending { " DESC" } else { "" }))
                .collect();
            let _ = writeln!(s, "  Sort {}", keys.join(", "));
        }
        if q.skip.is_some() || q.limit.is_some() {
            let _ = writeln!(
                s,
                "  Slice skip={} limit={}",
                q.skip.unwrap_or(0),
                q.limit.map_or("none".to_string(), |l| l.to_string())
            );
        }
        if self.empty_result {
            let _ = writeln!(s, "  EmptyResult");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "Warning: {w}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cypher::parse;

    fn planned(src: &str) -> QueryPlan {
        plan(&parse(src).unwrap(), &GraphSchema::aviation())
    }

    #[test]
    fn registration_uses_unique_index() {
        let p = planned("MATCH (a:Aircraft) WHERE a.registration = 'N123AB' RETURN a");
        assert_eq!(
            p.patterns[0].access,
            AccessPath::IndexLookup {
                index: IndexDef::new("Aircraft", &["registration"]),
                values: vec![Expr::str("N123AB")],
            }
        );
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn city_without_index_warns() {
        let p = planned("MATCH (x:Accident) WHERE x.city = 'Denver' RETURN x");
        assert_eq!(
            p.patterns[0].access,
            AccessPath::LabelScan {
                label: "Accident".into()
            }
        );
        assert_eq!(p.warnings, vec!["missing index on :Accident(city)".to_string()]);
    }

    #[test]
    fn composite_index_preferred() {
        let p = planned("MATCH (a:Aircraft {make: 'Boeing', model: '737-800'}) RETURN a");
        match &p.patterns[0].access {
            AccessPath::IndexLookup { index, values } => {
                assert_eq!(index, &IndexDef::new("Aircraft", &["make", "model"]));
                assert_eq!(values.len(), 2);
            }
            other => panic!("unexpected access {other:?}"),
        }
    }

    #[test]
    fn unknown_label_and_type_are_warnings() {
        let p = planned("MATCH (a:Spaceship)-[:FLEW]->(b) RETURN a");
        assert!(p.empty_result);
        assert_eq!(
            p.warnings,
            vec![
                "unknown label :Spaceship".to_string(),
                "unknown relationship type :FLEW".to_string()
            ]
        );
    }

    #[test]
    fn later_pattern_reuses_binding() {
        let p = planned(
            "MATCH (x:Accident), (a:Aircraft {registration: 'N1'})-[:INVOLVED_IN]->(x) RETURN x",
        );
        assert_eq!(p.patterns[0].pattern, 1);
        assert_eq!(p.patterns[1].pattern, 0);
        assert_eq!(
            p.patterns[1].access,
            AccessPath::Bound {
                variable: "x".into()
            }
        );
    }

    #[test]
    fn force_full_scan() {
        let q = parse("MATCH (a:Aircraft) WHERE a.registration = 'N1' RETURN a").unwrap();
        let p = plan_with(
            &q,
            &GraphSchema::aviation(),
            PlanOptions {
                force_full_scan: true,
            },
        );
        assert_eq!(p.patterns[0].access, AccessPath::FullScan);
    }

    #[test]
    fn golden_rendering() {
        let p = planned(
            "MATCH (a:Aircraft)-[:INVOLVED_IN]->(x:Accident)-[:OCCURRED_AT]->(p:Airport) \
             WHERE a.make = 'Boeing' AND p.icao = 'KLAX' AND x.city = 'Los Angeles' \
             RETURN x ORDER BY x.event_date DESC LIMIT 2",
        );
        let expected = "\
Plan
  1. Match (a:Aircraft)-[:INVOLVED_IN]->(x:Accident)-[:OCCURRED_AT]->(p:Airport)
     anchor (a:Aircraft) via IndexLookup :Aircraft(make) = ('Boeing')
     expand -[:INVOLVED_IN]->(x:Accident)
     expand -[:OCCURRED_AT]->(p:Airport)
  Filter a.make = 'Boeing'
  Filter p.icao = 'KLAX'
  Filter x.city = 'Los Angeles'
  Project x
  Sort x.event_date DESC
  Slice skip=0 limit=2
Warning: missing index on :Accident(city)
";
        assert_eq!(p.render(), expected);
    }
}
