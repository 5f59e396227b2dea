use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cypher::{parse, BinOp, Cell, Expr, Query, ResultSet};

use super::TranslationResult;

pub const DEFAULT_CONTEXT_TURNS: usize = 5;

/// `(label, property, value)` from an equality filter, or a bare label the
/// query returned. Renders as `(Aircraft, make, Boeing)` or `(Accident)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SalientEntity {
    pub label: String,
    pub property: Option<String>,
    pub value: Option<String>,
}

impl fmt::Display for SalientEntity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.property, &self.value) {
            (Some(p), Some(v)) => write!(f, "({}, {p}, {v})", self.label),
            _ => write!(f, "({})", self.label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub question: String,
    pub query: String,
    pub salient: Vec<SalientEntity>,
}

/// One session's recent turns, oldest first, never more than `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationContext {
    pub session_id: String,
    pub turns: Vec<Turn>,
    pub bound: usize,
}

impl ConversationContext {
    pub fn new(session_id: &str) -> Self {
        Self::with_bound(session_id, DEFAULT_CONTEXT_TURNS)
    }

    pub fn with_bound(session_id: &str, bound: usize) -> Self {
        ConversationContext {
            session_id: session_id.to_string(),
            turns: Vec::new(),
            bound: bound.max(1),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

fn labels(q: &Query) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for p in &q.patterns {
        for n in p.nodes() {
            if let (Some(v), Some(l)) = (&n.variable, &n.label) {
                out.push((v.clone(), l.clone()));
            }
        }
    }
    out
}

/// Equality filters (WHERE conjuncts and inline property maps) on labelled
/// variables, then the labels of returned nodes, deduplicated in that order.
pub fn salient_entities(q: &Query, execution: Option<&ResultSet>) -> Vec<SalientEntity> {
    let labels = labels(q);
    let label_of = |v: &str| labels.iter().find(|(x, _)| x == v).map(|(_, l)| l.clone());
    let mut out: Vec<SalientEntity> = Vec::new();
    let mut push = |e: SalientEntity| {
        if !out.contains(&e) {
            out.push(e);
        }
    };
    let literal = |e: &Expr| match e {
        Expr::Literal(l) => Some(l.to_value().render()),
        _ => None,
    };
    for p in &q.patterns {
        for n in p.nodes() {
            let Some(label) = &n.label else { continue };
            for (k, v) in &n.properties {
                if let Some(value) = literal(v) {
                    push(SalientEntity {
                        label: label.clone(),
                        property: Some(k.clone()),
                        value: Some(value),
                    });
                }
            }
        }
    }
    if let Some(w) = &q.where_clause {
        for c in w.conjuncts() {
            let Expr::Binary(l, BinOp::Eq, r) = c else { continue };
            let (prop, lit) = match (l.as_ref(), r.as_ref()) {
                (Expr::Prop(v, k), other) | (other, Expr::Prop(v, k)) => ((v, k), other),
                _ => continue,
            };
            if let (Some(label), Some(value)) = (label_of(prop.0), literal(lit)) {
                push(SalientEntity {
                    label,
                    property: Some(prop.1.clone()),
                    value: Some(value),
                });
            }
        }
    }
    let mut returned: Vec<String> = q
        .returns
        .iter()
        .filter_map(|r| match &r.expr {
            Expr::Var(v) => label_of(v),
            _ => None,
        })
        .collect();
    if let Some(rs) = execution {
        for row in &rs.rows {
            for cell in row {
                if let Cell::Node(n) = cell {
                    returned.extend(n.labels.iter().cloned());
                }
            }
        }
    }
    for label in returned {
        push(SalientEntity {
            label,
            property: None,
            value: None,
        });
    }
    out
}

/// A new context with the turn appended and the oldest turns dropped past
/// the bound. The input context is left untouched.
pub fn update_context(
    context: &ConversationContext,
    question: &str,
    result: &TranslationResult,
    execution: &ResultSet,
) -> ConversationContext {
    let mut next = context.clone();
    next.turns.push(Turn {
        question: question.to_string(),
        query: result.query.clone(),
        salient: salient_entities(&result.ast, Some(execution)),
    });
    let excess = next.turns.len().saturating_sub(next.bound);
    next.turns.drain(..excess);
    next
}

/// Salient entities of a query text; empty when it does not parse.
pub fn salient_of_text(query: &str) -> Vec<SalientEntity> {
    parse(query).map(|q| salient_entities(&q, None)).unwrap_or_default()
}
