//! Random well-formed queries over the vocabulary of [`crate::graphgen`].
//!
//! Every generated query binds at most three node positions so the oracle's
//! exhaustive enumeration stays cheap. Return items are always aliased
//! `c0`, `c1`, ...; when SKIP or LIMIT is present the query orders by every
//! column, so ties can only occur between identical rows.

use std::collections::BTreeMap;

use askg_core::cypher::{
    AggFunc, BinOp, Expr, HopRange, Literal, NodePattern, PathPattern, Query, RelDirection,
    RelPattern, ReturnItem, SortItem,
};
use askg_core::graphstore::Value;
use rand::Rng;

use crate::graphgen::{LABELS, REL_TYPES, STRINGS};

const PROPS: &[&str] = &["i", "s", "b", "w", "d"];

pub fn random_query(rng: &mut impl Rng) -> (Query, BTreeMap<String, Value>) {
    let mut g = Gen {
        rng,
        params: BTreeMap::new(),
    };
    let patterns = g.patterns();
    let vars: Vec<String> = {
        let mut v: Vec<String> = Vec::new();
        for p in &patterns {
            for n in p.nodes() {
                if let Some(name) = &n.variable {
                    if !v.contains(name) {
                        v.push(name.clone());
                    }
                }
            }
        }
        v
    };
    let where_clause = if !vars.is_empty() && g.rng.random_bool(0.7) {
        Some(g.predicate(&vars, 2))
    } else {
        None
    };
    let (returns, distinct) = g.returns(&vars);
    let aggregating = returns.iter().any(|r| matches!(r.expr, Expr::Agg { .. }));
    let mut q = Query {
        patterns,
        where_clause,
        distinct,
        returns,
        order_by: Vec::new(),
        skip: None,
        limit: None,
    };
    if g.rng.random_bool(0.4) {
        q.order_by = (0..q.returns.len())
            .map(|i| SortItem {
                expr: Expr::Var(format!("c{i}")),
                descending: g.rng.random_bool(0.5),
            })
            .collect();
        if g.rng.random_bool(0.5) {
            q.skip = Some(g.rng.random_range(0..4));
        }
        if g.rng.random_bool(0.6) {
            q.limit = Some(g.rng.random_range(0..8));
        }
    } else if !aggregating && !distinct && g.rng.random_bool(0.15) && vars.len() == 1 {
        // Sorting by a non-returned property is allowed in plain mode.
        q.order_by = vec![SortItem {
            expr: Expr::prop(&vars[0], PROPS[g.rng.random_range(0..PROPS.len())]),
            descending: g.rng.random_bool(0.5),
        }];
    }
    let params = g.params;
    (q, params)
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    params: BTreeMap<String, Value>,
}

impl<R: Rng> Gen<'_, R> {
    fn pick<'a>(&mut self, xs: &'a [&'a str]) -> &'a str {
        xs[self.rng.random_range(0..xs.len())]
    }

    /// A property key; one in twelve is absent from every node.
    fn prop(&mut self) -> &'static str {
        if self.rng.random_bool(1.0 / 12.0) {
            "missing"
        } else {
            self.pick(PROPS)
        }
    }

    fn node(&mut self, var: Option<&str>) -> NodePattern {
        let label = self
            .rng
            .random_bool(0.6)
            .then(|| self.pick(LABELS).to_string());
        let mut properties = Vec::new();
        if self.rng.random_bool(0.15) {
            properties.push(("i".to_string(), Expr::int(self.rng.random_range(-1..4))));
        }
        NodePattern {
            variable: var.map(str::to_string),
            label,
            properties,
        }
    }

    fn rel(&mut self) -> RelPattern {
        let direction = match self.rng.random_range(0..3) {
            0 => RelDirection::Out,
            1 => RelDirection::In,
            _ => RelDirection::Undirected,
        };
        let rel_type = self
            .rng
            .random_bool(0.6)
            .then(|| self.pick(REL_TYPES).to_string());
        let hops = self.rng.random_bool(0.25).then(|| {
            let min = self.rng.random_range(1..=2);
            HopRange {
                min,
                max: self.rng.random_range(min..=3),
            }
        });
        RelPattern {
            variable: None,
            rel_type,
            direction,
            hops,
        }
    }

    fn maybe_var(&mut self, name: &str) -> Option<String> {
        self.rng.random_bool(0.85).then(|| name.to_string())
    }

    fn patterns(&mut self) -> Vec<PathPattern> {
        match self.rng.random_range(0..5) {
            0 => vec![PathPattern {
                start: self.node(Some("a")),
                steps: vec![],
            }],
            1 => {
                let b = self.maybe_var("b");
                vec![PathPattern {
                    start: self.node(Some("a")),
                    steps: vec![(self.rel(), self.node(b.as_deref()))],
                }]
            }
            2 => {
                let b = self.maybe_var("b");
                let c = self.maybe_var("c");
                vec![PathPattern {
                    start: self.node(Some("a")),
                    steps: vec![
                        (self.rel(), self.node(b.as_deref())),
                        (self.rel(), self.node(c.as_deref())),
                    ],
                }]
            }
            3 => {
                // Two patterns sharing `b`.
                let first = PathPattern {
                    start: self.node(Some("a")),
                    steps: vec![(self.rel(), self.node(Some("b")))],
                };
                let second = PathPattern {
                    start: NodePattern {
                        variable: Some("b".into()),
                        ..Default::default()
                    },
                    steps: vec![(self.rel(), self.node(Some("c")))],
                };
                vec![first, second]
            }
            _ => vec![
                PathPattern {
                    start: self.node(Some("a")),
                    steps: vec![],
                },
                PathPattern {
                    start: self.node(Some("b")),
                    steps: vec![],
                },
            ],
        }
    }

    fn literal_for(&mut self, prop: &str) -> Expr {
        // One literal in six has a deliberately wrong type.
        let prop = if self.rng.random_bool(1.0 / 6.0) {
            self.prop()
        } else {
            prop
        };
        let lit = match prop {
            "i" => Literal::Int(self.rng.random_range(-3..=6)),
            "w" => Literal::Float(self.rng.random_range(-4..=8) as f64 * 0.5),
            "b" => Literal::Bool(self.rng.random_bool(0.5)),
            "d" => Literal::Str(format!(
                "{}-{:02}-01",
                2000 + self.rng.random_range(0..4),
                self.rng.random_range(1..=12)
            )),
            _ => Literal::Str(self.pick(STRINGS).to_string()),
        };
        if self.rng.random_bool(0.1) {
            let name = format!("p{}", self.params.len());
            self.params.insert(name.clone(), lit.to_value());
            Expr::Param(name)
        } else {
            Expr::Literal(lit)
        }
    }

    fn atom(&mut self, vars: &[String]) -> Expr {
        let v = vars[self.rng.random_range(0..vars.len())].clone();
        let prop = self.prop();
        match self.rng.random_range(0..10) {
            0..=4 => {
                let op = [BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge]
                    [self.rng.random_range(0..6)];
                let lit = self.literal_for(prop);
                if self.rng.random_bool(0.8) {
                    Expr::bin(Expr::prop(&v, prop), op, lit)
                } else {
                    Expr::bin(lit, op, Expr::prop(&v, prop))
                }
            }
            5 => {
                let w = vars[self.rng.random_range(0..vars.len())].clone();
                let op = [BinOp::Eq, BinOp::Lt, BinOp::Ge][self.rng.random_range(0..3)];
                Expr::bin(Expr::prop(&v, prop), op, Expr::prop(&w, self.prop()))
            }
            6 => {
                let w = vars[self.rng.random_range(0..vars.len())].clone();
                let op = if self.rng.random_bool(0.5) { BinOp::Eq } else { BinOp::Ne };
                Expr::bin(Expr::Var(v), op, Expr::Var(w))
            }
            7 => {
                let op = if self.rng.random_bool(0.5) {
                    BinOp::Contains
                } else {
                    BinOp::StartsWith
                };
                let needle = ["a", "al", "be", "ta", ""][self.rng.random_range(0..5)];
                Expr::bin(Expr::prop(&v, "s"), op, Expr::str(needle))
            }
            _ => Expr::prop(&v, "b"),
        }
    }

    fn predicate(&mut self, vars: &[String], depth: u32) -> Expr {
        if depth == 0 || self.rng.random_bool(0.4) {
            return self.atom(vars);
        }
        match self.rng.random_range(0..3) {
            0 => Expr::and(self.predicate(vars, depth - 1), self.predicate(vars, depth - 1)),
            1 => Expr::Or(
                Box::new(self.predicate(vars, depth - 1)),
                Box::new(self.predicate(vars, depth - 1)),
            ),
            _ => Expr::Not(Box::new(self.predicate(vars, depth - 1))),
        }
    }

    fn plain_item(&mut self, vars: &[String]) -> Expr {
        let v = &vars[self.rng.random_range(0..vars.len())];
        if self.rng.random_bool(0.25) {
            Expr::Var(v.clone())
        } else {
            Expr::prop(v, self.prop())
        }
    }

    fn returns(&mut self, vars: &[String]) -> (Vec<ReturnItem>, bool) {
        let mut exprs = Vec::new();
        let mut distinct = false;
        match self.rng.random_range(0..3) {
            0 | 1 => {
                for _ in 0..self.rng.random_range(1..=3) {
                    exprs.push(self.plain_item(vars));
                }
                distinct = self.rng.random_bool(0.4);
            }
            _ => {
                for _ in 0..self.rng.random_range(0..=1) {
                    exprs.push(self.plain_item(vars));
                }
                for _ in 0..self.rng.random_range(1..=2) {
                    let func = [
                        AggFunc::Count,
                        AggFunc::Sum,
                        AggFunc::Avg,
                        AggFunc::Min,
                        AggFunc::Max,
                    ][self.rng.random_range(0..5)];
                    let star = func == AggFunc::Count && self.rng.random_bool(0.4);
                    let arg = (!star).then(|| {
                        let v = &vars[self.rng.random_range(0..vars.len())];
                        let prop = match func {
                            AggFunc::Sum | AggFunc::Avg => ["i", "w", "s"][self.rng.random_range(0..3)],
                            _ => self.prop(),
                        };
                        Box::new(Expr::prop(v, prop))
                    });
                    exprs.push(Expr::Agg {
                        func,
                        distinct: !star && self.rng.random_bool(0.3),
                        arg,
                    });
                }
            }
        }
        let items = exprs
            .into_iter()
            .enumerate()
            .map(|(i, expr)| ReturnItem {
                expr,
                alias: Some(format!("c{i}")),
            })
            .collect();
        (items, distinct)
    }
}
