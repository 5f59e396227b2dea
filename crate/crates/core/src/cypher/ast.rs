//! Query syntax tree. `Display` renders canonical query text which parses
//! back to an equal tree.

use std::fmt;

use crate::graphstore::Value;

pub const DEFAULT_HOP_CEILING: u32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub patterns: Vec<PathPattern>,
    pub where_clause: Option<Expr>,
    pub distinct: bool,
    pub returns: Vec<ReturnItem>,
    pub order_by: Vec<SortItem>,
    pub skip: Option<u64>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPattern {
    pub start: NodePattern,
    pub steps: Vec<(RelPattern, NodePattern)>,
}

impl PathPattern {
    pub fn nodes(&self) -> impl Iterator<Item = &NodePattern> {
        std::iter::once(&self.start).chain(self.steps.iter().map(|(_, n)| n))
    }

    pub fn node(&self, i: usize) -> &NodePattern {
        if i == 0 {
            &self.start
        } else {
            &self.steps[i - 1].1
        }
    }

    pub fn node_count(&self) -> usize {
        self.steps.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodePattern {
    pub variable: Option<String>,
    pub label: Option<String>,
    /// Literal or parameter values only.
    pub properties: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelDirection {
    Out,
    In,
    Undirected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopRange {
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelPattern {
    pub variable: Option<String>,
    pub rel_type: Option<String>,
    pub direction: RelDirection,
    /// `None` for a single hop.
    pub hops: Option<HopRange>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl Literal {
    pub fn to_value(&self) -> Value {
        match self {
            Literal::Str(s) => Value::Str(s.clone()),
            Literal::Int(i) => Value::Int(*i),
            Literal::Float(f) => Value::Float(*f),
            Literal::Bool(b) => Value::Bool(*b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Contains,
    StartsWith,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Contains => "CONTAINS",
            BinOp::StartsWith => "STARTS WITH",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "count",
            AggFunc::Sum => "sum",
            AggFunc::Avg => "avg",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
        }
    }

    pub fn from_name(name: &str) -> Option<AggFunc> {
        match name.to_ascii_lowercase().as_str() {
            "count" => Some(AggFunc::Count),
            "sum" => Some(AggFunc::Sum),
            "avg" => Some(AggFunc::Avg),
            "min" => Some(AggFunc::Min),
            "max" => Some(AggFunc::Max),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Literal),
    Param(String),
    Var(String),
    Prop(String, String),
    Binary(Box<Expr>, BinOp, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// `arg = None` is `count(*)`.
    Agg {
        func: AggFunc,
        distinct: bool,
        arg: Option<Box<Expr>>,
    },
}

impl Expr {
    pub fn prop(var: &str, prop: &str) -> Expr {
        Expr::Prop(var.to_string(), prop.to_string())
    }

    pub fn str(s: &str) -> Expr {
        Expr::Literal(Literal::Str(s.to_string()))
    }

    pub fn int(i: i64) -> Expr {
        Expr::Literal(Literal::Int(i))
    }

    pub fn bin(l: Expr, op: BinOp, r: Expr) -> Expr {
        Expr::Binary(Box::new(l), op, Box::new(r))
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::And(Box::new(l), Box::new(r))
    }

    /// Left-nested conjunction; `None` for an empty list.
    pub fn conjoin(parts: impl IntoIterator<Item = Expr>) -> Option<Expr> {
        parts.into_iter().reduce(Expr::and)
    }

    /// Top-level AND operands.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::And(l, r) => {
                let mut v = l.conjuncts();
                v.extend(r.conjuncts());
                v
            }
            other => vec![other],
        }
    }

    pub fn contains_aggregate(&self) -> bool {
        match self {
            Expr::Agg { .. } => true,
            Expr::Binary(l, _, r) | Expr::And(l, r) | Expr::Or(l, r) => {
                l.contains_aggregate() || r.contains_aggregate()
            }
            Expr::Not(e) => e.contains_aggregate(),
            _ => false,
        }
    }

    /// Variables referenced, in first-occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Var(v) | Expr::Prop(v, _) => {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
            Expr::Binary(l, _, r) | Expr::And(l, r) | Expr::Or(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Not(e) => e.collect_vars(out),
            Expr::Agg { arg: Some(a), .. } => a.collect_vars(out),
            _ => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Not(..) => 3,
            Expr::Binary(..) => 4,
            _ => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl ReturnItem {
    pub fn column_name(&self) -> String {
        self.alias.clone().unwrap_or_else(|| self.expr.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortItem {
    pub expr: Expr,
    pub descending: bool,
}

impl Query {
    pub fn is_aggregating(&self) -> bool {
        self.returns.iter().any(|r| r.expr.contains_aggregate())
    }

    /// Variables bound by MATCH, in first-occurrence order.
    pub fn bound_variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for p in &self.patterns {
            let vars = std::iter::once(p.start.variable.as_deref()).chain(
                p.steps
                    .iter()
                    .flat_map(|(r, n)| [r.variable.as_deref(), n.variable.as_deref()]),
            );
            for v in vars.flatten() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

// ---- canonical rendering ----------------------------------------------

fn write_str_lit(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("'")?;
    for c in s.chars() {
        match c {
            '\\' => f.write_str("\\\\")?,
            '\'' => f.write_str("\\'")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("'")
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write_str_lit(f, s),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Bool(b) => f.write_str(if *b { "true" } else { "false" }),
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precedence();
        match self {
            Expr::Literal(l) => write!(f, "{l}"),
            Expr::Param(name) => write!(f, "${name}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Prop(v, k) => write!(f, "{v}.{k}"),
            Expr::Binary(l, op, r) => {
                write_child(f, l, l.precedence() <= p)?;
                write!(f, " {} ", op.symbol())?;
                write_child(f, r, r.precedence() <= p)
            }
            Expr::And(l, r) => {
                write_child(f, l, l.precedence() < p)?;
                f.write_str(" AND ")?;
                write_child(f, r, r.precedence() <= p)
            }
            Expr::Or(l, r) => {
                write_child(f, l, l.precedence() < p)?;
                f.write_str(" OR ")?;
                write_child(f, r, r.precedence() <= p)
            }
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                write_child(f, e, e.precedence() < p)
            }
            Expr::Agg {
                func,
                distinct,
                arg,
            } => {
                write!(f, "{}(", func.name())?;
                if *distinct {
                    f.write_str("DISTINCT ")?;
                }
                match arg {
                    Some(a) => write!(f, "{a}")?,
                    None => f.write_str("*")?,
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for NodePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        if let Some(v) = &self.variable {
            f.write_str(v)?;
        }
        if let Some(l) = &self.label {
            write!(f, ":{l}")?;
        }
        if !self.properties.is_empty() {
            if self.variable.is_some() || self.label.is_some() {
                f.write_str(" ")?;
            }
            f.write_str("{")?;
            for (i, (k, v)) in self.properties.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{k}: {v}")?;
            }
            f.write_str("}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for RelPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.direction == RelDirection::In { "<-" } else { "-" })?;
        let has_body = self.variable.is_some() || self.rel_type.is_some() || self.hops.is_some();
        if has_body {
            f.write_str("[")?;
            if let Some(v) = &self.variable {
                f.write_str(v)?;
            }
            if let Some(t) = &self.rel_type {
                write!(f, ":{t}")?;
            }
            if let Some(h) = self.hops {
                if h.min == h.max {
                    write!(f, "*{}", h.min)?;
                } else {
                    write!(f, "*{}..{}", h.min, h.max)?;
                }
            }
            f.write_str("]")?;
        }
        f.write_str(if self.direction == RelDirection::Out { "->" } else { "-" })
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.start)?;
        for (r, n) in &self.steps {
            write!(f, "{r}{n}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MATCH ")?;
        for (i, p) in self.patterns.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        if let Some(w) = &self.where_clause {
            write!(f, " WHERE {w}")?;
        }
        f.write_str(" RETURN ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        for (i, r) in self.returns.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", r.expr)?;
            if let Some(a) = &r.alias {
                write!(f, " AS {a}")?;
            }
        }
        if !self.order_by.is_empty() {
            f.write_str(" ORDER BY ")?;
            for (i, s) in self.order_by.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", s.expr)?;
                if s.descending {
                    f.write_str(" DESC")?;
                }
            }
        }
        if let Some(s) = self.skip {
            write!(f, " SKIP {s}")?;
        }
        if let Some(l) = self.limit {
            write!(f, " LIMIT {l}")?;
        }
        Ok(())
    }
}
