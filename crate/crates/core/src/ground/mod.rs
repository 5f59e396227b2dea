//! Answers composed only from result cells, and a checker that every value
//! an answer states came from those cells.
//!
//! Composed text follows two conventions that make checking exact: string
//! values, dates and node properties appear inside double quotes (with `\"`
//! and `\\` escapes), and numeric cells appear as bare numbers. Template
//! wording never contains a number of its own.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::cypher::{Cell, NodeRef, Query, ResultSet};
use crate::graphstore::{NodeId, Value};

pub const EMPTY_ANSWER: &str = "No matching records found.";
pub const MAX_LISTED_ROWS: usize = 20;
const OMITTED: &str = "Further rows omitted.";

/// Quoted phrases the templates may emit that are not cell values.
pub const TEMPLATE_WORDS: &[&str] = &[];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Citation {
    pub value: String,
    pub row: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundedAnswer {
    pub text: String,
    pub provenance: Vec<NodeId>,
    pub citations: Vec<Citation>,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A quoted value or number in the text that no cell holds.
    UnsupportedValue { value: String },
    UnknownProvenance { id: NodeId },
    BadCitation { value: String, row: usize, column: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnsupportedValue { value } => write!(f, "value {value:?} is not in the results"),
            Violation::UnknownProvenance { id } => write!(f, "node {id} is not in the result provenance"),
            Violation::BadCitation { value, row, column } => {
                write!(f, "citation {value:?} does not match row {row}, column {column}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Optional rewording of a composed answer. Its output is kept only when it
/// still verifies against the same results.
pub trait Paraphraser {
    fn paraphrase(&self, question: &str, draft: &str) -> Option<String>;
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Properties shown for a node, most identifying first.
fn shown_properties(n: &NodeRef) -> Vec<&str> {
    let preferred: &[&str] = match n.labels.first().map(String::as_str) {
        Some("Accident") => &["event_id", "event_date", "city", "state", "injury_level"],
        Some("Aircraft") => &["registration", "make", "model"],
        Some("Airport") => &["icao", "name"],
        Some("Location") => &["name"],
        _ => &["name"],
    };
    let mut shown: Vec<&str> = preferred.iter().copied().filter(|p| n.properties.contains_key(*p)).collect();
    if shown.is_empty() {
        shown.extend(n.properties.keys().map(String::as_str).take(1));
    }
    shown
}

struct Writer {
    text: String,
    citations: Vec<Citation>,
}

impl Writer {
    fn cite(&mut self, value: String, row: usize, column: usize, quoted: bool) {
        self.text.push_str(&if quoted { quote(&value) } else { value.clone() });
        self.citations.push(Citation { value, row, column });
    }

    fn cell(&mut self, name: &str, cell: &Cell, row: usize, column: usize) {
        match cell {
            Cell::Null => self.text.push_str(&format!("{name} none")),
            Cell::Value(v) => {
                self.text.push_str(name);
                self.text.push(' ');
                let bare = matches!(v, Value::Int(_) | Value::Float(_));
                self.cite(v.render(), row, column, !bare);
            }
            Cell::Node(n) => {
                self.text.push_str(n.labels.first().map_or("node", String::as_str));
                let props = shown_properties(n);
                for (i, p) in props.iter().enumerate() {
                    self.text.push_str(if i == 0 { " " } else { ", " });
                    self.text.push_str(p);
                    self.text.push(' ');
                    self.cite(n.properties[*p].render(), row, column, true);
                }
            }
            Cell::Rel(r) => self.text.push_str(&format!("{} relationship", r.rel_type)),
        }
    }
}

fn is_word(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c == '_')
}

/// Template answer. Deterministic in its inputs; `question` is only passed
/// on to a paraphraser.
pub fn compose(question: &str, query: &Query, results: &ResultSet) -> GroundedAnswer {
    compose_with(question, query, results, None)
}

pub fn compose_with(
    question: &str,
    query: &Query,
    results: &ResultSet,
    paraphraser: Option<&dyn Paraphraser>,
) -> GroundedAnswer {
    if results.rows.is_empty() {
        return GroundedAnswer {
            text: EMPTY_ANSWER.to_string(),
            provenance: Vec::new(),
            citations: Vec::new(),
            verified: true,
        };
    }
    let mut w = Writer {
        text: String::new(),
        citations: Vec::new(),
    };
    let listed = results.rows.len().min(MAX_LISTED_ROWS);
    let single_number = results.rows.len() == 1
        && results.columns.len() == 1
        && matches!(results.rows[0][0], Cell::Value(Value::Int(_) | Value::Float(_)));
    if single_number {
        let col = &results.columns[0];
        let Cell::Value(v) = &results.rows[0][0] else { unreachable!() };
        w.text.push_str("Result: ");
        if is_word(col) {
            w.cite(v.render(), 0, 0, false);
            w.text.push_str(&format!(" {}.", col.replace('_', " ")));
        } else {
            w.text.push_str(&format!("{col} = "));
            w.cite(v.render(), 0, 0, false);
            w.text.push('.');
        }
    } else {
        let top = query.limit.is_some() && !query.order_by.is_empty();
        w.text.push_str(if top { "Top results: " } else { "Results: " });
        for (r, row) in results.rows.iter().take(listed).enumerate() {
            if r > 0 {
                w.text.push_str("; ");
            }
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    w.text.push_str(", ");
                }
                w.cell(&results.columns[c], cell, r, c);
            }
        }
        w.text.push('.');
        if listed < results.rows.len() || results.page.has_more {
            w.text.push(' ');
            w.text.push_str(OMITTED);
        }
    }
    let mut provenance: Vec<NodeId> = results.provenance.iter().take(listed).flatten().copied().collect();
    provenance.sort();
    provenance.dedup();
    let mut answer = GroundedAnswer {
        text: w.text,
        provenance,
        citations: w.citations,
        verified: false,
    };
    answer.verified = verify(&answer, results).passed();
    if let Some(p) = paraphraser {
        if let Some(text) = p.paraphrase(question, &answer.text) {
            let candidate = GroundedAnswer {
                text,
                verified: false,
                ..answer.clone()
            };
            if verify(&candidate, results).passed() {
                return GroundedAnswer {
                    verified: true,
                    ..candidate
                };
            }
        }
    }
    answer
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Numeric reading of a token. Thousands separators are accepted only in
/// their canonical grouping.
fn numeric(s: &str) -> Option<f64> {
    let t = s.trim();
    let grouped = canonical_grouping(t);
    let plain = if grouped { t.replace(',', "") } else { t.to_string() };
    if !plain.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    plain.parse::<f64>().ok()
}

fn canonical_grouping(t: &str) -> bool {
    let body = t.strip_prefix('-').unwrap_or(t);
    let int = body.split('.').next().unwrap_or("");
    let groups: Vec<&str> = int.split(',').collect();
    groups.len() > 1
        && (1..=3).contains(&groups[0].len())
        && groups[1..].iter().all(|g| g.len() == 3)
        && groups.iter().all(|g| g.chars().all(|c| c.is_ascii_digit()))
}

/// Quoted segments (unescaped) and the text outside them.
fn split_quotes(text: &str) -> (Vec<String>, String) {
    let mut quoted = Vec::new();
    let mut outside = String::new();
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '"' {
            outside.push(c);
            continue;
        }
        let mut q = String::new();
        let mut closed = false;
        while let Some(d) = chars.next() {
            match d {
                '\\' => q.extend(chars.next()),
                '"' => {
                    closed = true;
                    break;
                }
                _ => q.push(d),
            }
        }
        if !closed {
            // An unterminated quote still has to be supported.
            quoted.push(q);
            break;
        }
        quoted.push(q);
        outside.push(' ');
    }
    (quoted, outside)
}

/// Outside-quote tokens that read as numbers.
fn numeric_tokens(outside: &str) -> Vec<String> {
    outside
        .split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| matches!(c, ',' | ';' | ':' | '(' | ')' | '[' | ']' | '=' | '!' | '?'))
                .trim_end_matches('.')
        })
        .filter(|t| numeric(t).is_some())
        .map(str::to_string)
        .collect()
}

struct Evidence {
    strings: BTreeSet<String>,
    numbers: Vec<f64>,
}

impl Evidence {
    fn of(results: &ResultSet) -> Self {
        let mut strings = BTreeSet::new();
        let mut numbers = Vec::new();
        let mut add = |s: &str| {
            if let Some(n) = numeric(s) {
                numbers.push(n);
            }
            strings.insert(normalize(s));
        };
        for row in &results.rows {
            for cell in row {
                for t in cell.texts() {
                    add(&t);
                }
            }
        }
        for c in &results.columns {
            add(c);
            for t in c.split(|ch: char| !ch.is_alphanumeric() && ch != '.' && ch != '-') {
                add(t);
            }
        }
        for w in TEMPLATE_WORDS {
            add(w);
        }
        Evidence { strings, numbers }
    }

    fn supports(&self, value: &str) -> bool {
        self.strings.contains(&normalize(value)) || numeric(value).is_some_and(|n| self.numbers.contains(&n))
    }
}

/// Checks every quoted value and number in the text, every citation and
/// every provenance id against `results`.
pub fn verify(answer: &GroundedAnswer, results: &ResultSet) -> Verdict {
    let mut violations = Vec::new();
    let evidence = Evidence::of(results);
    let (quoted, outside) = split_quotes(&answer.text);
    let mut seen = BTreeSet::new();
    for v in quoted.into_iter().chain(numeric_tokens(&outside)) {
        if !evidence.supports(&v) && seen.insert(v.clone()) {
            violations.push(Violation::UnsupportedValue { value: v });
        }
    }
    for c in &answer.citations {
        let cell = results.rows.get(c.row).and_then(|r| r.get(c.column));
        let in_cell = cell.is_some_and(|cell| cell.texts().iter().any(|t| normalize(t) == normalize(&c.value)));
        if !in_cell || !answer.text.contains(&c.value) && !answer.text.contains(&quote(&c.value)) {
            violations.push(Violation::BadCitation {
                value: c.value.clone(),
                row: c.row,
                column: c.column,
            });
        }
    }
    let union = results.provenance_union();
    for id in &answer.provenance {
        if union.binary_search(id).is_err() {
            violations.push(Violation::UnknownProvenance { id: *id });
        }
    }
    Verdict { violations }
}
