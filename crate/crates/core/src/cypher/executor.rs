//! Backtracking executor.
//!
//! Matching binds one node per pattern position and one relationship per
//! single-hop step, starting each pattern from its planned anchor and
//! walking outwards. A variable-length step binds only its far endpoint:
//! every node whose shortest distance lies in the hop range. Two single-hop
//! steps never bind the same relationship. WHERE conjuncts run as soon as
//! their last variable is bound.
//!
//! Comparison semantics are two-valued: anything compared with an absent
//! property is false (including `<>`), and comparing incompatible types is
//! false and counted in `ExecStats::type_mismatches`. Integers and floats
//! compare numerically; a string compared with a date is parsed as an ISO
//! date first.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use chrono::NaiveDate;

use super::ast::{AggFunc, BinOp, Expr, NodePattern, Query, RelDirection};
use super::error::CypherError;
use super::planner::{AccessPath, QueryPlan};
use super::result::{
    total_cmp, Cell, ExecStats, NodeRef, PageInfo, PageRequest, RelRef, ResultSet, MAX_PAGE_SIZE,
};
use super::semantic::resolve_sort_column;
use crate::graphstore::{compare_values, Direction, NodeId, PropertyGraph, RelId, Value};

pub type Params = BTreeMap<String, Value>;

/// Runs `plan` and returns every row, unpaginated.
pub fn run(graph: &PropertyGraph, plan: &QueryPlan, params: &Params) -> Result<ResultSet, CypherError> {
    let mut rs = run_capped(graph, plan, params, None)?;
    rs.page = PageInfo {
        number: 0,
        size: rs.rows.len(),
        has_more: false,
    };
    Ok(rs)
}

/// Runs `plan` and returns one page of the result. SKIP and LIMIT apply
/// first; the page is a window over what remains.
pub fn execute(
    graph: &PropertyGraph,
    plan: &QueryPlan,
    params: &Params,
    page: PageRequest,
) -> Result<ResultSet, CypherError> {
    if page.size > MAX_PAGE_SIZE {
        return Err(CypherError::PageSizeTooLarge {
            requested: page.size,
            max: MAX_PAGE_SIZE,
        });
    }
    if page.size == 0 {
        return Err(CypherError::PageSizeZero);
    }
    let start = page.number.saturating_mul(page.size);
    let want = start.saturating_add(page.size).saturating_add(1);
    let mut rs = run_capped(graph, plan, params, Some(want))?;
    let total = rs.rows.len();
    let from = start.min(total);
    let to = start.saturating_add(page.size).min(total);
    rs.rows = rs.rows.drain(from..to).collect();
    rs.provenance = rs.provenance.drain(from..to).collect();
    rs.page = PageInfo {
        number: page.number,
        size: page.size,
        has_more: total > to,
    };
    Ok(rs)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Bound {
    Node(NodeId),
    Rel(RelId),
}

/// Runtime value; cheap handles instead of cloned nodes.
#[derive(Clone, Debug)]
enum Eval {
    Null,
    Val(Value),
    Node(NodeId),
    Rel(RelId),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum Key {
    Null,
    Bool(bool),
    Int(i64),
    Float(u64),
    Date(NaiveDate),
    Str(String),
    Node(NodeId),
    Rel(RelId),
}

fn key_of(e: &Eval) -> Key {
    match e {
        Eval::Null => Key::Null,
        Eval::Node(n) => Key::Node(*n),
        Eval::Rel(r) => Key::Rel(*r),
        Eval::Val(v) => match v {
            Value::Bool(b) => Key::Bool(*b),
            Value::Int(i) => Key::Int(*i),
            Value::Float(f) => Key::Float(if *f == 0.0 { 0f64.to_bits() } else { f.to_bits() }),
            Value::Date(d) => Key::Date(*d),
            Value::Str(s) => Key::Str(s.clone()),
        },
    }
}

struct Compiled<'q> {
    node_slots: Vec<Vec<usize>>,
    rel_slots: Vec<Vec<Option<usize>>>,
    rel_slot_list: Vec<usize>,
    var_slot: HashMap<&'q str, usize>,
    slot_count: usize,
    /// Slots each filter depends on.
    filters: Vec<(Vec<usize>, &'q Expr)>,
    by_slot: Vec<Vec<usize>>,
}

fn compile<'q>(q: &'q Query, filters: &'q [Expr]) -> Compiled<'q> {
    let mut var_slot: HashMap<&str, usize> = HashMap::new();
    let mut next = 0usize;
    let mut node_slots = Vec::new();
    let mut rel_slots = Vec::new();
    let mut rel_slot_list = Vec::new();
    for p in &q.patterns {
        let mut ns = Vec::new();
        for n in p.nodes() {
            ns.push(assign(&n.variable, &mut var_slot, &mut next));
        }
        let mut rs = Vec::new();
        for (r, _) in &p.steps {
            if r.hops.is_some() {
                rs.push(None);
            } else {
                let s = assign(&r.variable, &mut var_slot, &mut next);
                rel_slot_list.push(s);
                rs.push(Some(s));
            }
        }
        node_slots.push(ns);
        rel_slots.push(rs);
    }
    let mut by_slot = vec![Vec::new(); next];
    let compiled_filters: Vec<(Vec<usize>, &Expr)> = filters
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let slots: Vec<usize> = f.variables().iter().map(|v| var_slot[v]).collect();
            for &s in &slots {
                by_slot[s].push(fi);
            }
            (slots, f)
        })
        .collect();
    Compiled {
        node_slots,
        rel_slots,
        rel_slot_list,
        var_slot,
        slot_count: next,
        filters: compiled_filters,
        by_slot,
    }
}

fn assign<'q>(v: &'q Option<String>, map: &mut HashMap<&'q str, usize>, next: &mut usize) -> usize {
    match v {
        Some(name) => *map.entry(name.as_str()).or_insert_with(|| {
            *next += 1;
            *next - 1
        }),
        None => {
            *next += 1;
            *next - 1
        }
    }
}

enum Flow {
    Continue,
    Stop,
}

struct Exec<'a> {
    graph: &'a PropertyGraph,
    params: &'a Params,
    q: &'a Query,
    plan: &'a QueryPlan,
    c: Compiled<'a>,
    stats: ExecStats,
    sink: Sink,
}

/// Collected output before sorting and slicing.
struct Sink {
    mode: Mode,
    rows: Vec<Vec<Eval>>,
    sort_keys: Vec<Vec<Eval>>,
    provenance: Vec<Vec<NodeId>>,
    index: HashMap<Vec<Key>, usize>,
    /// Aggregate inputs per group: one list per return item.
    agg_inputs: Vec<Vec<Vec<Eval>>>,
    cap: Option<usize>,
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Mode {
    Plain,
    Distinct,
    Aggregate,
}

fn run_capped(
    graph: &PropertyGraph,
    plan: &QueryPlan,
    params: &Params,
    page_need: Option<usize>,
) -> Result<ResultSet, CypherError> {
    let started = Instant::now();
    let q = &plan.query;
    check_params(plan, params)?;
    let columns: Vec<String> = q.returns.iter().map(|r| r.column_name()).collect();
    let mode = if q.is_aggregating() {
        Mode::Aggregate
    } else if q.distinct {
        Mode::Distinct
    } else {
        Mode::Plain
    };
    let skip = q.skip.map_or(0, |s| s as usize);
    let cap = if mode == Mode::Plain && q.order_by.is_empty() {
        let by_limit = q.limit.map(|l| skip.saturating_add(l as usize));
        let by_page = page_need.map(|n| skip.saturating_add(n));
        match (by_limit, by_page) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    } else {
        None
    };

    let mut ex = Exec {
        graph,
        params,
        q,
        plan,
        c: compile(q, &plan.filters),
        stats: ExecStats::default(),
        sink: Sink {
            mode,
            rows: Vec::new(),
            sort_keys: Vec::new(),
            provenance: Vec::new(),
            index: HashMap::new(),
            agg_inputs: Vec::new(),
            cap,
        },
    };

    let constant_ok = ex
        .c
        .filters
        .iter()
        .filter(|(slots, _)| slots.is_empty())
        .map(|(_, f)| *f)
        .collect::<Vec<_>>();
    let mut proceed = !plan.empty_result && cap != Some(0);
    let mut bindings = vec![None; ex.c.slot_count];
    for f in constant_ok {
        if !ex.eval_bool(f, &bindings) {
            proceed = false;
        }
    }
    if proceed {
        ex.search(0, 0, &mut bindings);
    }
    let mut rs = ex.finish(columns)?;
    rs.stats.elapsed_ms = started.elapsed().as_secs_f64() * 1000.0;
    rs.warnings = plan.warnings.clone();
    Ok(rs)
}

fn check_params(plan: &QueryPlan, params: &Params) -> Result<(), CypherError> {
    fn walk(e: &Expr, params: &Params) -> Result<(), CypherError> {
        match e {
            Expr::Param(p) if !params.contains_key(p) => Err(CypherError::MissingParam(p.clone())),
            Expr::Binary(l, _, r) | Expr::And(l, r) | Expr::Or(l, r) => {
                walk(l, params)?;
                walk(r, params)
            }
            Expr::Not(x) => walk(x, params),
            Expr::Agg { arg: Some(a), .. } => walk(a, params),
            _ => Ok(()),
        }
    }
    let q = &plan.query;
    for p in &q.patterns {
        for n in p.nodes() {
            for (_, v) in &n.properties {
                walk(v, params)?;
            }
        }
    }
    for f in &plan.filters {
        walk(f, params)?;
    }
    for r in &q.returns {
        walk(&r.expr, params)?;
    }
    for s in &q.order_by {
        walk(&s.expr, params)?;
    }
    Ok(())
}

fn forward(d: RelDirection) -> Direction {
    match d {
        RelDirection::Out => Direction::Outgoing,
        RelDirection::In => Direction::Incoming,
        RelDirection::Undirected => Direction::Both,
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

impl<'a> Exec<'a> {
    // ---- matching -------------------------------------------------------

    /// `step` 0 binds the anchor; steps 1.. walk forward from the anchor to
    /// the end of the path, then backward to its start.
    fn search(&mut self, pi: usize, step: usize, b: &mut Vec<Option<Bound>>) -> Flow {
        if pi == self.plan.patterns.len() {
            return self.emit(b);
        }
        let pp = &self.plan.patterns[pi];
        let p = &self.q.patterns[pp.pattern];
        let nsteps = p.steps.len();
        if step == 0 {
            for id in self.anchor_candidates(pi, b) {
                self.stats.rows_scanned += 1;
                if let Flow::Stop = self.bind_node(pi, pp.anchor, id, step, b) {
                    return Flow::Stop;
                }
            }
            return Flow::Continue;
        }
        let forward_steps = nsteps - pp.anchor;
        if step > nsteps {
            return self.search(pi + 1, 0, b);
        }
        let (edge, from_pos, to_pos, reverse) = if step <= forward_steps {
            let i = pp.anchor + step - 1;
            (i, i, i + 1, false)
        } else {
            let i = pp.anchor - (step - forward_steps);
            (i, i + 1, i, true)
        };
        let from_slot = self.c.node_slots[pp.pattern][from_pos];
        let Some(Bound::Node(cur)) = b[from_slot] else {
            unreachable!("walk starts from a bound node")
        };
        let rel = &p.steps[edge].0;
        let mut dir = forward(rel.direction);
        if reverse {
            dir = dir.reversed();
        }
        let rel_type = rel.rel_type.as_deref();
        match rel.hops {
            Some(h) => {
                let ids = self
                    .graph
                    .expand(cur, rel_type, dir, h.min as usize, h.max as usize)
                    .ids;
                for id in ids {
                    self.stats.rows_scanned += 1;
                    if let Flow::Stop = self.bind_node(pi, to_pos, id, step, b) {
                        return Flow::Stop;
                    }
                }
            }
            None => {
                let rslot = self.c.rel_slots[pp.pattern][edge].expect("single hop has a slot");
                for (rid, other) in self.graph.neighbours(cur, rel_type, dir) {
                    self.stats.rows_scanned += 1;
                    let used = self
                        .c
                        .rel_slot_list
                        .iter()
                        .any(|&s| s != rslot && b[s] == Some(Bound::Rel(rid)));
                    if used {
                        continue;
                    }
                    b[rslot] = Some(Bound::Rel(rid));
                    let flow = if self.filters_pass(rslot, b) {
                        self.bind_node(pi, to_pos, other, step, b)
                    } else {
                        Flow::Continue
                    };
                    b[rslot] = None;
                    if let Flow::Stop = flow {
                        return Flow::Stop;
                    }
                }
            }
        }
        Flow::Continue
    }

    fn bind_node(
        &mut self,
        pi: usize,
        pos: usize,
        id: NodeId,
        step: usize,
        b: &mut Vec<Option<Bound>>,
    ) -> Flow {
        let pattern = self.plan.patterns[pi].pattern;
        let slot = self.c.node_slots[pattern][pos];
        let np = self.q.patterns[pattern].node(pos);
        if !self.node_matches(np, id, b) {
            return Flow::Continue;
        }
        match b[slot] {
            Some(Bound::Node(existing)) => {
                if existing != id {
                    return Flow::Continue;
                }
                self.search(pi, step + 1, b)
            }
            _ => {
                b[slot] = Some(Bound::Node(id));
                let flow = if self.filters_pass(slot, b) {
                    self.search(pi, step + 1, b)
                } else {
                    Flow::Continue
                };
                b[slot] = None;
                flow
            }
        }
    }

    fn node_matches(&mut self, np: &NodePattern, id: NodeId, b: &[Option<Bound>]) -> bool {
        let Some(node) = self.graph.node(id) else {
            return false;
        };
        if let Some(l) = &np.label {
            if !node.has_label(l) {
                return false;
            }
        }
        for (k, v) in &np.properties {
            let want = self.eval(v, b);
            let have = node.get(k).map_or(Eval::Null, |x| Eval::Val(x.clone()));
            if !self.compare(BinOp::Eq, &have, &want) {
                return false;
            }
        }
        true
    }

    fn anchor_candidates(&mut self, pi: usize, b: &[Option<Bound>]) -> Vec<NodeId> {
        let pp = &self.plan.patterns[pi];
        match &pp.access {
            AccessPath::Bound { variable } => match b[self.c.var_slot[variable.as_str()]] {
                Some(Bound::Node(id)) => vec![id],
                _ => Vec::new(),
            },
            AccessPath::IndexLookup { index, values } => {
                if !self.graph.schema().indexes.contains(index) {
                    return self.graph.nodes_with_label(&index.label);
                }
                let mut variants: Vec<Vec<Value>> = vec![Vec::new()];
                for v in values {
                    let Eval::Val(val) = self.eval(v, b) else {
                        return Vec::new();
                    };
                    let mut alts = vec![val.clone()];
                    match &val {
                        Value::Str(s) => alts.extend(parse_date(s).map(Value::Date)),
                        Value::Date(d) => alts.push(Value::Str(d.format("%Y-%m-%d").to_string())),
                        _ => {}
                    }
                    variants = variants
                        .into_iter()
                        .flat_map(|prefix| {
                            alts.iter().map(move |a| {
                                let mut p = prefix.clone();
                                p.push(a.clone());
                                p
                            })
                        })
                        .collect();
                }
                let mut ids: Vec<NodeId> = variants
                    .iter()
                    .flat_map(|vals| self.graph.index_probe(index, vals))
                    .collect();
                ids.sort();
                ids.dedup();
                ids
            }
            AccessPath::LabelScan { label } => self.graph.nodes_with_label(label),
            AccessPath::FullScan => self.graph.all_node_ids(),
        }
    }

    fn filters_pass(&mut self, slot: usize, b: &[Option<Bound>]) -> bool {
        for i in 0..self.c.by_slot[slot].len() {
            let fi = self.c.by_slot[slot][i];
            let (slots, f) = &self.c.filters[fi];
            if slots.iter().all(|s| b[*s].is_some()) {
                let f: &Expr = f;
                if !self.eval_bool(f, b) {
                    return false;
                }
            }
        }
        true
    }

    // ---- evaluation -----------------------------------------------------

    fn eval(&mut self, e: &Expr, b: &[Option<Bound>]) -> Eval {
        match e {
            Expr::Literal(l) => Eval::Val(l.to_value()),
            Expr::Param(p) => Eval::Val(self.params[p].clone()),
            Expr::Var(v) => match b[self.c.var_slot[v.as_str()]] {
                Some(Bound::Node(n)) => Eval::Node(n),
                Some(Bound::Rel(r)) => Eval::Rel(r),
                None => Eval::Null,
            },
            Expr::Prop(v, k) => {
                let props = match b[self.c.var_slot[v.as_str()]] {
                    Some(Bound::Node(n)) => self.graph.node(n).map(|n| &n.properties),
                    Some(Bound::Rel(r)) => self.graph.relationship(r).map(|r| &r.properties),
                    None => None,
                };
                props
                    .and_then(|p| p.get(k))
                    .map_or(Eval::Null, |v| Eval::Val(v.clone()))
            }
            Expr::Binary(l, op, r) => {
                let l = self.eval(l, b);
                let r = self.eval(r, b);
                Eval::Val(Value::Bool(self.compare(*op, &l, &r)))
            }
            Expr::And(l, r) => {
                let v = self.eval_bool(l, b) && self.eval_bool(r, b);
                Eval::Val(Value::Bool(v))
            }
            Expr::Or(l, r) => {
                let v = self.eval_bool(l, b) || self.eval_bool(r, b);
                Eval::Val(Value::Bool(v))
            }
            Expr::Not(x) => Eval::Val(Value::Bool(!self.eval_bool(x, b))),
            Expr::Agg { .. } => unreachable!("aggregates are evaluated by the sink"),
        }
    }

    fn eval_bool(&mut self, e: &Expr, b: &[Option<Bound>]) -> bool {
        match self.eval(e, b) {
            Eval::Val(Value::Bool(v)) => v,
            Eval::Null => false,
            _ => {
                self.stats.type_mismatches += 1;
                false
            }
        }
    }

    fn compare(&mut self, op: BinOp, l: &Eval, r: &Eval) -> bool {
        let out = compare_evals(op, l, r);
        match out {
            Cmp::Mismatch => {
                self.stats.type_mismatches += 1;
                false
            }
            Cmp::Null => false,
            Cmp::Bool(v) => v,
        }
    }

    // ---- output ---------------------------------------------------------

    fn provenance(&self, b: &[Option<Bound>]) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = b
            .iter()
            .filter_map(|x| match x {
                Some(Bound::Node(n)) => Some(*n),
                _ => None,
            })
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    fn emit(&mut self, b: &mut Vec<Option<Bound>>) -> Flow {
        let prov = self.provenance(b);
        match self.sink.mode {
            Mode::Plain => {
                let row: Vec<Eval> = self.q.returns.iter().map(|r| self.eval(&r.expr, b)).collect();
                let keys: Vec<Eval> = (0..self.q.order_by.len())
                    .map(|i| {
                        let e = &self.q.order_by[i].expr;
                        match resolve_sort_column(self.q, e) {
                            Some(c) => row[c].clone(),
                            None => self.eval(e, b),
                        }
                    })
                    .collect();
                self.sink.rows.push(row);
                self.sink.sort_keys.push(keys);
                self.sink.provenance.push(prov);
                if self.sink.cap.is_some_and(|c| self.sink.rows.len() >= c) {
                    return Flow::Stop;
                }
            }
            Mode::Distinct => {
                let row: Vec<Eval> = self.q.returns.iter().map(|r| self.eval(&r.expr, b)).collect();
                let key: Vec<Key> = row.iter().map(key_of).collect();
                match self.sink.index.get(&key) {
                    Some(&i) => merge_prov(&mut self.sink.provenance[i], &prov),
                    None => {
                        self.sink.index.insert(key, self.sink.rows.len());
                        self.sink.rows.push(row);
                        self.sink.provenance.push(prov);
                    }
                }
            }
            Mode::Aggregate => {
                let mut row = Vec::with_capacity(self.q.returns.len());
                let mut inputs = Vec::with_capacity(self.q.returns.len());
                for r in &self.q.returns {
                    match &r.expr {
                        Expr::Agg { arg, .. } => {
                            row.push(Eval::Null);
                            inputs.push(match arg {
                                Some(a) => self.eval(a, b),
                                None => Eval::Val(Value::Bool(true)),
                            });
                        }
                        e => {
                            row.push(self.eval(e, b));
                            inputs.push(Eval::Null);
                        }
                    }
                }
                let key: Vec<Key> = self
                    .q
                    .returns
                    .iter()
                    .zip(&row)
                    .filter(|(r, _)| !matches!(r.expr, Expr::Agg { .. }))
                    .map(|(_, c)| key_of(c))
                    .collect();
                let gi = match self.sink.index.get(&key) {
                    Some(&i) => {
                        merge_prov(&mut self.sink.provenance[i], &prov);
                        i
                    }
                    None => {
                        let i = self.sink.rows.len();
                        self.sink.index.insert(key, i);
                        self.sink.rows.push(row);
                        self.sink.provenance.push(prov);
                        self.sink.agg_inputs.push(vec![Vec::new(); self.q.returns.len()]);
                        i
                    }
                };
                for (col, v) in inputs.into_iter().enumerate() {
                    if matches!(self.q.returns[col].expr, Expr::Agg { .. }) {
                        self.sink.agg_inputs[gi][col].push(v);
                    }
                }
            }
        }
        Flow::Continue
    }

    fn finish(mut self, columns: Vec<String>) -> Result<ResultSet, CypherError> {
        let q = self.q;
        let mut rows = std::mem::take(&mut self.sink.rows);
        let mut provenance = std::mem::take(&mut self.sink.provenance);
        let mut sort_keys = std::mem::take(&mut self.sink.sort_keys);

        if self.sink.mode == Mode::Aggregate {
            let inputs = std::mem::take(&mut self.sink.agg_inputs);
            for (gi, group) in inputs.into_iter().enumerate() {
                for (col, values) in group.into_iter().enumerate() {
                    if let Expr::Agg { func, distinct, arg } = &q.returns[col].expr {
                        rows[gi][col] =
                            aggregate(*func, *distinct, arg.is_none(), values, &mut self.stats);
                    }
                }
            }
        }
        if self.sink.mode != Mode::Plain {
            sort_keys = rows
                .iter()
                .map(|row| {
                    q.order_by
                        .iter()
                        .map(|s| {
                            let c = resolve_sort_column(q, &s.expr)
                                .expect("checked by the semantic pass");
                            row[c].clone()
                        })
                        .collect()
                })
                .collect();
        }

        let mut out_rows: Vec<Vec<Cell>> = rows.iter().map(|r| self.cells(r)).collect();
        if !q.order_by.is_empty() {
            let key_cells: Vec<Vec<Cell>> = sort_keys.iter().map(|k| self.cells(k)).collect();
            let mut order: Vec<usize> = (0..out_rows.len()).collect();
            order.sort_by(|&a, &b| {
                for (i, s) in q.order_by.iter().enumerate() {
                    let mut o = total_cmp(&key_cells[a][i], &key_cells[b][i]);
                    if s.descending {
                        o = o.reverse();
                    }
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                provenance[a].cmp(&provenance[b])
            });
            let mut r2 = Vec::with_capacity(order.len());
            let mut p2 = Vec::with_capacity(order.len());
            for i in order {
                r2.push(std::mem::take(&mut out_rows[i]));
                p2.push(std::mem::take(&mut provenance[i]));
            }
            out_rows = r2;
            provenance = p2;
        }

        let skip = q.skip.map_or(0, |s| s as usize).min(out_rows.len());
        out_rows.drain(..skip);
        provenance.drain(..skip);
        if let Some(l) = q.limit {
            out_rows.truncate(l as usize);
            provenance.truncate(l as usize);
        }
        Ok(ResultSet {
            columns,
            rows: out_rows,
            provenance,
            page: PageInfo {
                number: 0,
                size: 0,
                has_more: false,
            },
            stats: self.stats,
            warnings: Vec::new(),
        })
    }

    fn cells(&self, row: &[Eval]) -> Vec<Cell> {
        row.iter().map(|e| self.cell(e)).collect()
    }

    fn cell(&self, e: &Eval) -> Cell {
        match e {
            Eval::Null => Cell::Null,
            Eval::Val(v) => Cell::Value(v.clone()),
            Eval::Node(id) => match self.graph.node(*id) {
                Some(n) => Cell::Node(NodeRef {
                    id: n.id,
                    labels: n.labels.iter().cloned().collect(),
                    properties: n.properties.clone(),
                }),
                None => Cell::Null,
            },
            Eval::Rel(id) => match self.graph.relationship(*id) {
                Some(r) => Cell::Rel(RelRef {
                    id: r.id,
                    rel_type: r.rel_type.clone(),
                    source: r.source,
                    target: r.target,
                    properties: r.properties.clone(),
                }),
                None => Cell::Null,
            },
        }
    }
}

fn merge_prov(into: &mut Vec<NodeId>, from: &[NodeId]) {
    into.extend_from_slice(from);
    into.sort();
    into.dedup();
}

enum Cmp {
    Null,
    Mismatch,
    Bool(bool),
}

fn compare_evals(op: BinOp, l: &Eval, r: &Eval) -> Cmp {
    let ord_to = |o: Ordering| -> bool {
        match op {
            BinOp::Eq => o == Ordering::Equal,
            BinOp::Ne => o != Ordering::Equal,
            BinOp::Lt => o == Ordering::Less,
            BinOp::Le => o != Ordering::Greater,
            BinOp::Gt => o == Ordering::Greater,
            BinOp::Ge => o != Ordering::Less,
            BinOp::Contains | BinOp::StartsWith => unreachable!(),
        }
    };
    match (l, r) {
        (Eval::Null, _) | (_, Eval::Null) => Cmp::Null,
        (Eval::Node(a), Eval::Node(b)) => match op {
            BinOp::Eq => Cmp::Bool(a == b),
            BinOp::Ne => Cmp::Bool(a != b),
            _ => Cmp::Mismatch,
        },
        (Eval::Rel(a), Eval::Rel(b)) => match op {
            BinOp::Eq => Cmp::Bool(a == b),
            BinOp::Ne => Cmp::Bool(a != b),
            _ => Cmp::Mismatch,
        },
        (Eval::Val(a), Eval::Val(b)) => match op {
            BinOp::Contains | BinOp::StartsWith => match (a, b) {
                (Value::Str(x), Value::Str(y)) => Cmp::Bool(if op == BinOp::Contains {
                    x.contains(y.as_str())
                } else {
                    x.starts_with(y.as_str())
                }),
                _ => Cmp::Mismatch,
            },
            _ => {
                let coerced = match (a, b) {
                    (Value::Date(d), Value::Str(s)) => {
                        parse_date(s).map(|e| compare_values(&Value::Date(*d), &Value::Date(e)))
                    }
                    (Value::Str(s), Value::Date(d)) => {
                        parse_date(s).map(|e| compare_values(&Value::Date(e), &Value::Date(*d)))
                    }
                    _ => Some(compare_values(a, b)),
                };
                match coerced.flatten() {
                    Some(o) => Cmp::Bool(ord_to(o)),
                    None => Cmp::Mismatch,
                }
            }
        },
        _ => Cmp::Mismatch,
    }
}

fn aggregate(func: AggFunc, distinct: bool, star: bool, values: Vec<Eval>, stats: &mut ExecStats) -> Eval {
    if star {
        return Eval::Val(Value::Int(values.len() as i64));
    }
    let mut vals: Vec<Eval> = values.into_iter().filter(|v| !matches!(v, Eval::Null)).collect();
    if distinct {
        let mut seen = std::collections::HashSet::new();
        vals.retain(|v| seen.insert(key_of(v)));
    }
    match func {
        AggFunc::Count => Eval::Val(Value::Int(vals.len() as i64)),
        AggFunc::Sum | AggFunc::Avg => {
            let mut ints: i128 = 0;
            let mut floats: Vec<f64> = Vec::new();
            let mut n = 0usize;
            for v in &vals {
                match v {
                    Eval::Val(Value::Int(i)) => {
                        ints += *i as i128;
                        n += 1;
                    }
                    Eval::Val(Value::Float(f)) => {
                        floats.push(*f);
                        n += 1;
                    }
                    _ => stats.type_mismatches += 1,
                }
            }
            floats.sort_by(f64::total_cmp);
            let fsum: f64 = floats.iter().sum();
            match func {
                AggFunc::Sum if floats.is_empty() => match i64::try_from(ints) {
                    Ok(i) => Eval::Val(Value::Int(i)),
                    Err(_) => Eval::Val(Value::Float(ints as f64)),
                },
                AggFunc::Sum => Eval::Val(Value::Float(ints as f64 + fsum)),
                _ if n == 0 => Eval::Null,
                _ => Eval::Val(Value::Float((ints as f64 + fsum) / n as f64)),
            }
        }
        AggFunc::Min | AggFunc::Max => {
            let cells: Vec<(Cell, Eval)> = vals
                .into_iter()
                .map(|v| {
                    let c = match &v {
                        Eval::Val(x) => Cell::Value(x.clone()),
                        Eval::Node(id) => Cell::Node(NodeRef {
                            id: *id,
                            labels: Vec::new(),
                            properties: Default::default(),
                        }),
                        Eval::Rel(id) => Cell::Rel(RelRef {
                            id: *id,
                            rel_type: String::new(),
                            source: NodeId(0),
                            target: NodeId(0),
                            properties: Default::default(),
                        }),
                        Eval::Null => Cell::Null,
                    };
                    (c, v)
                })
                .collect();
            let pick = if func == AggFunc::Min {
                cells.into_iter().min_by(|a, b| total_cmp(&a.0, &b.0))
            } else {
                cells.into_iter().max_by(|a, b| total_cmp(&a.0, &b.0))
            };
            pick.map_or(Eval::Null, |(_, v)| v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cypher::{parse, plan, query};
    use crate::graphstore::{GraphSchema, Properties};

    fn props(pairs: &[(&str, Value)]) -> Properties {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    /// Five accidents with years 2001, 2005, 1999, 2010, 2003; aircraft
    /// N1 (Boeing) is involved in the first three, N2 (Airbus) in the rest.
    fn fixture() -> PropertyGraph {
        let mut g = PropertyGraph::with_schema(GraphSchema::aviation());
        let n1 = g
            .create_node(["Aircraft"], props(&[("registration", "N1".into()), ("make", "Boeing".into())]))
            .unwrap();
        let n2 = g
            .create_node(["Aircraft"], props(&[("registration", "N2".into()), ("make", "Airbus".into())]))
            .unwrap();
        for (i, year) in [2001, 2005, 1999, 2010, 2003].into_iter().enumerate() {
            let date = NaiveDate::from_ymd_opt(year as i32, 3, 1).unwrap();
            let x = g
                .create_node(
                    ["Accident"],
                    props(&[
                        ("event_id", format!("E{i}").into()),
                        ("event_year", Value::Int(year)),
                        ("event_date", Value::Date(date)),
                    ]),
                )
                .unwrap();
            let a = if i < 3 { n1 } else { n2 };
            g.create_relationship("INVOLVED_IN", a, x, Properties::new()).unwrap();
        }
        g
    }

    fn q(g: &PropertyGraph, text: &str) -> ResultSet {
        query(g, text, &Params::new()).unwrap()
    }

    fn ints(rs: &ResultSet, col: usize) -> Vec<i64> {
        rs.rows.iter().map(|r| r[col].as_value().unwrap().as_i64().unwrap()).collect()
    }

    #[test]
    fn empty_graph_yields_no_rows() {
        let g = PropertyGraph::new();
        let p = plan(&parse("MATCH (n) RETURN n").unwrap(), &g.catalog());
        let rs = execute(&g, &p, &Params::new(), PageRequest::default()).unwrap();
        assert!(rs.rows.is_empty());
        assert!(!rs.page.has_more);
        assert!(q(&g, "MATCH (n) RETURN count(*)").rows.is_empty());
    }

    #[test]
    fn latest_two_years() {
        let rs = q(&fixture(), "MATCH (x:Accident) RETURN x.event_year ORDER BY x.event_year DESC LIMIT 2");
        let mut years = vec![2001, 2005, 1999, 2010, 2003];
        years.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(ints(&rs, 0), years[..2].to_vec());
    }

    #[test]
    fn grouped_count_and_provenance_union() {
        let g = fixture();
        let rs = q(
            &g,
            "MATCH (a:Aircraft)-[:INVOLVED_IN]->(x:Accident) \
             RETURN a.make AS make, count(x) AS n ORDER BY n DESC",
        );
        assert_eq!(rs.columns, vec!["make", "n"]);
        assert_eq!(rs.rows[0][0], Cell::Value("Boeing".into()));
        assert_eq!(ints(&rs, 1), vec![3, 2]);
        assert_eq!(rs.provenance[0].len(), 4);
    }

    #[test]
    fn aggregates_match_direct_computation() {
        let rs = q(
            &fixture(),
            "MATCH (x:Accident) RETURN sum(x.event_year), avg(x.event_year), min(x.event_year), max(x.event_year), count(DISTINCT x.event_year)",
        );
        let years = [2001i64, 2005, 1999, 2010, 2003];
        let sum: i64 = years.iter().sum();
        assert_eq!(rs.rows[0][0], Cell::Value(Value::Int(sum)));
        assert_eq!(rs.rows[0][1], Cell::Value(Value::Float(sum as f64 / 5.0)));
        assert_eq!(rs.rows[0][2], Cell::Value(Value::Int(1999)));
        assert_eq!(rs.rows[0][3], Cell::Value(Value::Int(2010)));
        assert_eq!(rs.rows[0][4], Cell::Value(Value::Int(5)));
    }

    #[test]
    fn absent_property_comparisons_are_false() {
        let g = fixture();
        assert!(q(&g, "MATCH (x:Accident) WHERE x.city = 'X' RETURN x").rows.is_empty());
        assert!(q(&g, "MATCH (x:Accident) WHERE x.city <> 'X' RETURN x").rows.is_empty());
        assert_eq!(q(&g, "MATCH (x:Accident) WHERE NOT x.city = 'X' RETURN x").len(), 5);
    }

    #[test]
    fn type_mismatch_is_counted_not_fatal() {
        let g = fixture();
        let p = plan(
            &parse("MATCH (x:Accident) WHERE x.event_date = $y RETURN x").unwrap(),
            &g.catalog(),
        );
        let params = Params::from([("y".to_string(), Value::Int(2001))]);
        let rs = run(&g, &p, &params).unwrap();
        assert!(rs.rows.is_empty());
        assert_eq!(rs.stats.type_mismatches, 5);
        let err = run(&g, &p, &Params::new()).unwrap_err();
        assert_eq!(err, CypherError::MissingParam("y".into()));
    }

    #[test]
    fn date_compares_with_iso_string() {
        let g = fixture();
        let rs = q(&g, "MATCH (x:Accident) WHERE x.event_date >= '2005-01-01' RETURN x.event_id ORDER BY x.event_id");
        assert_eq!(rs.len(), 2);
    }

    #[test]
    fn pages_partition_the_result() {
        let g = fixture();
        let p = plan(&parse("MATCH (x:Accident) RETURN x.event_id ORDER BY x.event_id").unwrap(), &g.catalog());
        let all = run(&g, &p, &Params::new()).unwrap();
        let mut joined = Vec::new();
        for number in 0..3 {
            let page = execute(&g, &p, &Params::new(), PageRequest { number, size: 2 }).unwrap();
            assert_eq!(page.page.has_more, number < 2);
            joined.extend(page.rows);
        }
        assert_eq!(joined, all.rows);
        assert!(matches!(
            execute(&g, &p, &Params::new(), PageRequest { number: 0, size: 1001 }),
            Err(CypherError::PageSizeTooLarge { requested: 1001, max: 1000 })
        ));
    }

    #[test]
    fn default_page_flags_more() {
        let mut g = PropertyGraph::new();
        for i in 0..150 {
            g.create_node(["N"], props(&[("i", Value::Int(i))])).unwrap();
        }
        let p = plan(&parse("MATCH (n:N) RETURN n.i").unwrap(), &g.catalog());
        let rs = execute(&g, &p, &Params::new(), PageRequest::default()).unwrap();
        assert_eq!(rs.len(), 100);
        assert!(rs.page.has_more);
    }

    #[test]
    fn variable_length_uses_shortest_distance() {
        let mut g = PropertyGraph::new();
        let ids: Vec<NodeId> = (0..4)
            .map(|i| g.create_node(["N"], props(&[("i", Value::Int(i))])).unwrap())
            .collect();
        for w in ids.windows(2) {
            g.create_relationship("T", w[0], w[1], Properties::new()).unwrap();
        }
        g.create_relationship("T", ids[0], ids[2], Properties::new()).unwrap();
        let rs = q(&g, "MATCH (a:N {i: 0})-[:T*2..3]->(b) RETURN b.i ORDER BY b.i");
        assert_eq!(ints(&rs, 0), vec![3]);
        let rs = q(&g, "MATCH (a:N {i: 3})<-[:T*1..2]-(b) RETURN b.i ORDER BY b.i");
        assert_eq!(ints(&rs, 0), vec![0, 1, 2]);
    }

    #[test]
    fn relationships_are_not_reused_within_a_match() {
        let mut g = PropertyGraph::new();
        let a = g.create_node(["N"], Properties::new()).unwrap();
        let b = g.create_node(["N"], Properties::new()).unwrap();
        g.create_relationship("T", a, b, Properties::new()).unwrap();
        assert_eq!(q(&g, "MATCH (x)-[:T]-(y)-[:T]-(z) RETURN x").len(), 0);
        assert_eq!(q(&g, "MATCH (x)-[:T]-(y) RETURN x").len(), 2);
    }

    #[test]
    fn distinct_merges_provenance() {
        let rs = q(&fixture(), "MATCH (a:Aircraft)-[:INVOLVED_IN]->(x) RETURN DISTINCT a.make ORDER BY a.make");
        assert_eq!(rs.len(), 2);
        assert_eq!(rs.provenance[0].len(), 3);
    }

    #[test]
    fn skip_then_limit() {
        let rs = q(&fixture(), "MATCH (x:Accident) RETURN x.event_year ORDER BY x.event_year SKIP 1 LIMIT 3");
        assert_eq!(ints(&rs, 0), vec![2001, 2003, 2005]);
    }
}
