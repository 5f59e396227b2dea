//! Tabular query results with per-row provenance.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::graphstore::{NodeId, Properties, RelId, Value};

pub const DEFAULT_PAGE_SIZE: usize = 100;
pub const MAX_PAGE_SIZE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRef {
    pub id: NodeId,
    pub labels: Vec<String>,
    pub properties: Properties,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelRef {
    pub id: RelId,
    #[serde(rename = "type")]
    pub rel_type: String,
    pub source: NodeId,
    pub target: NodeId,
    pub properties: Properties,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Value(Value),
    Node(NodeRef),
    Rel(RelRef),
}

impl Cell {
    /// Text fragments an answer may quote from this cell: the rendered
    /// scalar, or a node's id followed by its property values.
    pub fn texts(&self) -> Vec<String> {
        match self {
            Cell::Null => Vec::new(),
            Cell::Value(v) => vec![v.render()],
            Cell::Node(n) => std::iter::once(n.id.to_string())
                .chain(n.properties.values().map(Value::render))
                .collect(),
            Cell::Rel(r) => std::iter::once(r.id.to_string())
                .chain(r.properties.values().map(Value::render))
                .collect(),
        }
    }

    pub fn as_value(&self) -> Option<&Value> {
        match self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_node(&self) -> Option<&NodeRef> {
        match self {
            Cell::Node(n) => Some(n),
            _ => None,
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Null => s.serialize_none(),
            Cell::Value(v) => v.serialize(s),
            Cell::Node(n) => {
                let mut m = s.serialize_map(Some(4))?;
                m.serialize_entry("kind", "node")?;
                m.serialize_entry("id", &n.id)?;
                m.serialize_entry("labels", &n.labels)?;
                m.serialize_entry("properties", &n.properties)?;
                m.end()
            }
            Cell::Rel(r) => {
                let mut m = s.serialize_map(Some(6))?;
                m.serialize_entry("kind", "relationship")?;
                m.serialize_entry("id", &r.id)?;
                m.serialize_entry("type", &r.rel_type)?;
                m.serialize_entry("source", &r.source)?;
                m.serialize_entry("target", &r.target)?;
                m.serialize_entry("properties", &r.properties)?;
                m.end()
            }
        }
    }
}

/// Total order over cells used by ORDER BY, min and max. Booleans sort
/// before numbers, then dates, strings, nodes and relationships; null is
/// greater than everything. Integers and floats compare numerically, an
/// integer before an equal float.
pub fn total_cmp(a: &Cell, b: &Cell) -> Ordering {
    fn rank(c: &Cell) -> u8 {
        match c {
            Cell::Value(Value::Bool(_)) => 0,
            Cell::Value(Value::Int(_) | Value::Float(_)) => 1,
            Cell::Value(Value::Date(_)) => 2,
            Cell::Value(Value::Str(_)) => 3,
            Cell::Node(_) => 4,
            Cell::Rel(_) => 5,
            Cell::Null => 6,
        }
    }
    let r = rank(a).cmp(&rank(b));
    if r != Ordering::Equal {
        return r;
    }
    match (a, b) {
        (Cell::Value(x), Cell::Value(y)) => value_total_cmp(x, y),
        (Cell::Node(x), Cell::Node(y)) => x.id.cmp(&y.id),
        (Cell::Rel(x), Cell::Rel(y)) => x.id.cmp(&y.id),
        _ => Ordering::Equal,
    }
}

fn value_total_cmp(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Float(x), Value::Float(y)) => x.total_cmp(y),
        (Value::Int(x), Value::Float(y)) => {
            (*x as f64).partial_cmp(y).unwrap_or(Ordering::Less).then(Ordering::Less)
        }
        (Value::Float(x), Value::Int(y)) => {
            x.partial_cmp(&(*y as f64)).unwrap_or(Ordering::Greater).then(Ordering::Greater)
        }
        (Value::Date(x), Value::Date(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        _ => Ordering::Equal,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PageRequest {
    /// Zero-based.
    pub number: usize,
    pub size: usize,
}

impl Default for PageRequest {
    fn default() -> Self {
        Self {
            number: 0,
            size: DEFAULT_PAGE_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PageInfo {
    pub number: usize,
    pub size: usize,
    pub has_more: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExecStats {
    pub rows_scanned: u64,
    /// Comparisons between incompatible types (evaluated as false).
    pub type_mismatches: u64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Sorted node ids per row.
    pub provenance: Vec<Vec<NodeId>>,
    pub page: PageInfo,
    pub stats: ExecStats,
    pub warnings: Vec<String>,
}

impl ResultSet {
    pub fn empty(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            provenance: Vec::new(),
            page: PageInfo {
                number: 0,
                size: DEFAULT_PAGE_SIZE,
                has_more: false,
            },
            stats: ExecStats::default(),
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sorted union of every row's provenance.
    pub fn provenance_union(&self) -> Vec<NodeId> {
        let mut all: Vec<NodeId> = self.provenance.iter().flatten().copied().collect();
        all.sort();
        all.dedup();
        all
    }

    /// Row as column → cell, for display.
    pub fn row_map(&self, i: usize) -> BTreeMap<&str, &Cell> {
        self.columns
            .iter()
            .map(String::as_str)
            .zip(self.rows[i].iter())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_sorts_last() {
        let mut v = vec![
            Cell::Null,
            Cell::Value(Value::Str("b".into())),
            Cell::Value(Value::Int(2)),
            Cell::Value(Value::Float(1.5)),
            Cell::Value(Value::Bool(true)),
        ];
        v.sort_by(total_cmp);
        assert_eq!(v[0], Cell::Value(Value::Bool(true)));
        assert_eq!(v[1], Cell::Value(Value::Float(1.5)));
        assert_eq!(v[4], Cell::Null);
    }

    #[test]
    fn int_before_equal_float() {
        let i = Cell::Value(Value::Int(1));
        let f = Cell::Value(Value::Float(1.0));
        assert_eq!(total_cmp(&i, &f), Ordering::Less);
        assert_eq!(total_cmp(&f, &i), Ordering::Greater);
    }
}
