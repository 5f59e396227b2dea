//! In-memory property graph with label and property indexes.
//!
//! Nodes and relationships are kept in ordered maps so iteration order is
//! deterministic. Adjacency sets are maintained for both directions; the
//! label index and every declared property index are updated on each write.
//! Writes validate before they mutate, so a rejected write leaves the graph
//! untouched. Multi-operation atomicity comes from [`Transaction`], which
//! keeps an undo log and rolls back on drop unless committed.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::schema::{GraphSchema, IndexDef, SchemaReport};
use super::value::{IndexKey, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct RelId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for RelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type Properties = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: NodeId,
    pub labels: BTreeSet<String>,
    pub properties: Properties,
}

impl Node {
    pub fn has_label(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.properties.get(key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Relationship {
    pub id: RelId,
    pub rel_type: String,
    pub source: NodeId,
    pub target: NodeId,
    pub properties: Properties,
}

impl Relationship {
    /// The endpoint opposite `from`.
    pub fn other(&self, from: NodeId) -> NodeId {
        if self.source == from {
            self.target
        } else {
            self.source
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Outgoing,
    Incoming,
    Both,
}

impl Direction {
    pub fn reversed(self) -> Direction {
        match self {
            Direction::Outgoing => Direction::Incoming,
            Direction::Incoming => Direction::Outgoing,
            Direction::Both => Direction::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unique constraint :{label}({property}) violated by value(s): {}", values.join(", "))]
    UniqueViolation {
        label: String,
        property: String,
        values: Vec<String>,
    },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("node {0} not found")]
    NodeNotFound(NodeId),
    #[error("relationship {0} not found")]
    RelNotFound(RelId),
    #[error("a node needs at least one label")]
    NoLabels,
    #[error("relationship type must be non-empty")]
    EmptyRelType,
    #[error("injected failure: {0}")]
    Injected(String),
}

/// Result of an equality lookup.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lookup {
    pub ids: Vec<NodeId>,
    pub used_index: Option<IndexDef>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expansion {
    pub ids: Vec<NodeId>,
    pub warnings: Vec<String>,
}

/// Node count per label and relationship count per type.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub relationships: usize,
    pub labels: BTreeMap<String, usize>,
    pub relationship_types: BTreeMap<String, usize>,
}

type IndexTable = HashMap<Vec<IndexKey>, BTreeSet<NodeId>>;

#[derive(Debug, Clone, Default)]
pub struct PropertyGraph {
    nodes: BTreeMap<NodeId, Node>,
    rels: BTreeMap<RelId, Relationship>,
    outgoing: HashMap<NodeId, BTreeSet<RelId>>,
    incoming: HashMap<NodeId, BTreeSet<RelId>>,
    by_label: HashMap<String, BTreeSet<NodeId>>,
    indexes: HashMap<IndexDef, IndexTable>,
    schema: GraphSchema,
    next_node: u64,
    next_rel: u64,
}

impl PartialEq for PropertyGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.rels == other.rels
            && self.schema == other.schema
            && self.next_node == other.next_node
            && self.next_rel == other.next_rel
    }
}

impl PropertyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_schema(schema: GraphSchema) -> Self {
        let mut g = Self::new();
        g.apply_schema(&schema)
            .expect("schema on an empty graph cannot be violated");
        g
    }

    pub fn schema(&self) -> &GraphSchema {
        &self.schema
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn relationship_count(&self) -> usize {
        self.rels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn relationship(&self, id: RelId) -> Option<&Relationship> {
        self.rels.get(&id)
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn relationships(&self) -> impl Iterator<Item = &Relationship> {
        self.rels.values()
    }

    pub(crate) fn next_ids(&self) -> (u64, u64) {
        (self.next_node, self.next_rel)
    }

    /// Nodes carrying `label`, ascending by id.
    pub fn nodes_with_label(&self, label: &str) -> Vec<NodeId> {
        self.by_label
            .get(label)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn all_node_ids(&self) -> Vec<NodeId> {
        self.nodes.keys().copied().collect()
    }

    pub fn label_known(&self, label: &str) -> bool {
        self.schema.has_label(label) || self.by_label.get(label).is_some_and(|s| !s.is_empty())
    }

    pub fn relationship_type_known(&self, rel_type: &str) -> bool {
        self.schema.has_relationship_type(rel_type)
            || self.rels.values().any(|r| r.rel_type == rel_type)
    }

    /// Relationships incident to `id` in `direction`, deduplicated (a
    /// self-loop is reported once for `Both`), ascending by id.
    pub fn incident(&self, id: NodeId, direction: Direction) -> Vec<RelId> {
        let empty = BTreeSet::new();
        let out = self.outgoing.get(&id).unwrap_or(&empty);
        let inc = self.incoming.get(&id).unwrap_or(&empty);
        match direction {
            Direction::Outgoing => out.iter().copied().collect(),
            Direction::Incoming => inc.iter().copied().collect(),
            Direction::Both => out.union(inc).copied().collect(),
        }
    }

    /// (relationship, neighbour) pairs reachable in one hop.
    pub fn neighbours(
        &self,
        id: NodeId,
        rel_type: Option<&str>,
        direction: Direction,
    ) -> Vec<(RelId, NodeId)> {
        self.incident(id, direction)
            .into_iter()
            .filter_map(|rid| {
                let r = &self.rels[&rid];
                if rel_type.is_some_and(|t| t != r.rel_type) {
                    return None;
                }
                let other = match direction {
                    Direction::Outgoing => r.target,
                    Direction::Incoming => r.source,
                    Direction::Both => r.other(id),
                };
                Some((rid, other))
            })
            .collect()
    }

    /// Declared schema plus every label, property key and relationship
    /// endpoint pair present in the data. Planning against the catalog keeps
    /// schemaless graphs queryable.
    pub fn catalog(&self) -> GraphSchema {
        let mut s = self.schema.clone();
        for n in self.nodes.values() {
            for l in &n.labels {
                s.node_labels
                    .entry(l.clone())
                    .or_default()
                    .extend(n.properties.keys().cloned());
            }
        }
        for r in self.rels.values() {
            let pairs = s.relationship_types.entry(r.rel_type.clone()).or_default();
            let src = &self.nodes[&r.source].labels;
            let tgt = &self.nodes[&r.target].labels;
            for a in src {
                for b in tgt {
                    if !self.schema.relationship_types.contains_key(&r.rel_type) {
                        pairs.insert((a.clone(), b.clone()));
                    }
                }
            }
        }
        s
    }

    pub fn stats(&self) -> GraphStats {
        let mut labels: BTreeMap<String, usize> = BTreeMap::new();
        for (label, ids) in &self.by_label {
            if !ids.is_empty() {
                labels.insert(label.clone(), ids.len());
            }
        }
        let mut relationship_types: BTreeMap<String, usize> = BTreeMap::new();
        for r in self.rels.values() {
            *relationship_types.entry(r.rel_type.clone()).or_default() += 1;
        }
        GraphStats {
            nodes: self.nodes.len(),
            relationships: self.rels.len(),
            labels,
            relationship_types,
        }
    }

    // ---- schema -------------------------------------------------------

    /// Adds the constraints, indexes, labels and relationship types in
    /// `schema`. New unique constraints are validated against existing data;
    /// on a violation nothing changes and the offending values are listed.
    pub fn apply_schema(&mut self, schema: &GraphSchema) -> Result<SchemaReport, GraphError> {
        let merged = self.schema.merged(schema);
        if merged == self.schema {
            return Ok(self.schema_report(false));
        }
        for c in merged.unique_constraints.difference(&self.schema.unique_constraints) {
            let mut seen: HashMap<IndexKey, usize> = HashMap::new();
            let mut offending: BTreeSet<String> = BTreeSet::new();
            for id in self.nodes_with_label(&c.label) {
                if let Some(v) = self.nodes[&id].properties.get(&c.property) {
                    let n = seen.entry(v.index_key()).or_default();
                    *n += 1;
                    if *n > 1 {
                        offending.insert(v.render());
                    }
                }
            }
            if !offending.is_empty() {
                return Err(GraphError::UniqueViolation {
                    label: c.label.clone(),
                    property: c.property.clone(),
                    values: offending.into_iter().collect(),
                });
            }
        }
        let new_indexes: Vec<IndexDef> = merged
            .indexes
            .difference(&self.schema.indexes)
            .cloned()
            .collect();
        self.schema = merged;
        for def in new_indexes {
            let mut table = IndexTable::new();
            for id in self.nodes_with_label(&def.label) {
                if let Some(key) = index_key_for(&def, &self.nodes[&id].properties) {
                    table.entry(key).or_default().insert(id);
                }
            }
            self.indexes.insert(def, table);
        }
        Ok(self.schema_report(true))
    }

    pub fn schema_report(&self, changed: bool) -> SchemaReport {
        SchemaReport {
            unique_constraints: self
                .schema
                .unique_constraints
                .iter()
                .map(|c| c.to_string())
                .collect(),
            indexes: self.schema.indexes.iter().map(|i| i.to_string()).collect(),
            changed,
        }
    }

    // ---- lookups ------------------------------------------------------

    /// The index whose property set equals `properties` (in any order).
    pub fn index_for(&self, label: &str, properties: &[&str]) -> Option<&IndexDef> {
        let wanted: BTreeSet<&str> = properties.iter().copied().collect();
        self.schema.indexes.iter().find(|def| {
            def.label == label
                && def.properties.len() == wanted.len()
                && def.properties.iter().all(|p| wanted.contains(p.as_str()))
        })
    }

    /// Exact-match probe of an index; `values` are in the index's
    /// declared property order.
    pub fn index_probe(&self, def: &IndexDef, values: &[Value]) -> Vec<NodeId> {
        let key: Vec<IndexKey> = values.iter().map(Value::index_key).collect();
        self.indexes
            .get(def)
            .and_then(|t| t.get(&key))
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    /// Equality lookup. Uses a single-property index when declared,
    /// otherwise scans the label.
    pub fn lookup(&self, label: &str, property: &str, value: &Value) -> Lookup {
        self.lookup_composite(label, &[(property.to_string(), value.clone())])
    }

    /// Equality lookup forced onto the label-scan path.
    pub fn lookup_scan(&self, label: &str, property: &str, value: &Value) -> Lookup {
        self.scan_composite(label, &[(property.to_string(), value.clone())])
    }

    /// Multi-property equality lookup. All components must be bound;
    /// a composite index is used only when its property set matches exactly.
    pub fn lookup_composite(&self, label: &str, predicates: &[(String, Value)]) -> Lookup {
        let props: Vec<&str> = predicates.iter().map(|(p, _)| p.as_str()).collect();
        if let Some(def) = self.index_for(label, &props) {
            let values: Vec<Value> = def
                .properties
                .iter()
                .map(|p| {
                    predicates
                        .iter()
                        .find(|(k, _)| k == p)
                        .map(|(_, v)| v.clone())
                        .expect("index property bound")
                })
                .collect();
            return Lookup {
                ids: self.index_probe(def, &values),
                used_index: Some(def.clone()),
                warnings: Vec::new(),
            };
        }
        self.scan_composite(label, predicates)
    }

    pub fn scan_composite(&self, label: &str, predicates: &[(String, Value)]) -> Lookup {
        let mut warnings = Vec::new();
        if !self.label_known(label) {
            warnings.push(format!("unknown label :{label}"));
        }
        let ids = self
            .nodes_with_label(label)
            .into_iter()
            .filter(|id| {
                let node = &self.nodes[id];
                predicates.iter().all(|(k, v)| {
                    node.properties
                        .get(k)
                        .and_then(|pv| pv.loose_eq(v))
                        .unwrap_or(false)
                })
            })
            .collect();
        Lookup {
            ids,
            used_index: None,
            warnings,
        }
    }

    /// Breadth-first expansion from `start` over relationships of
    /// `rel_type` (any type when `None`). Returns every node whose
    /// shortest hop distance lies in `min..=max`, ascending by id. The start
    /// node is included only when `min == 0`.
    pub fn expand(
        &self,
        start: NodeId,
        rel_type: Option<&str>,
        direction: Direction,
        min: usize,
        max: usize,
    ) -> Expansion {
        let mut warnings = Vec::new();
        if let Some(t) = rel_type {
            if !self.relationship_type_known(t) {
                warnings.push(format!("unknown relationship type :{t}"));
                return Expansion {
                    ids: Vec::new(),
                    warnings,
                };
            }
        }
        if !self.contains_node(start) || min > max {
            return Expansion {
                ids: Vec::new(),
                warnings,
            };
        }
        let ids = self
            .distances_within(start, rel_type, direction, max)
            .into_iter()
            .filter(|(_, d)| *d >= min)
            .map(|(id, _)| id)
            .collect();
        Expansion { ids, warnings }
    }

    /// Shortest hop distances from `start`, up to `max` hops.
    pub fn distances_within(
        &self,
        start: NodeId,
        rel_type: Option<&str>,
        direction: Direction,
        max: usize,
    ) -> BTreeMap<NodeId, usize> {
        let mut dist = BTreeMap::new();
        dist.insert(start, 0usize);
        let mut queue = VecDeque::from([start]);
        while let Some(cur) = queue.pop_front() {
            let d = dist[&cur];
            if d == max {
                continue;
            }
            for (_, next) in self.neighbours(cur, rel_type, direction) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(next) {
                    e.insert(d + 1);
                    queue.push_back(next);
                }
            }
        }
        dist
    }

    // ---- validated single writes -------------------------------------

    pub fn create_node(
        &mut self,
        labels: impl IntoIterator<Item = impl Into<String>>,
        properties: Properties,
    ) -> Result<NodeId, GraphError> {
        let labels: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(GraphError::NoLabels);
        }
        self.check_unique(&labels, &properties, None)?;
        let id = NodeId(self.next_node);
        self.next_node += 1;
        self.raw_insert_node(Node {
            id,
            labels,
            properties,
        });
        Ok(id)
    }

    /// Merges `properties` into the node; returns the previous map.
    pub fn set_properties(
        &mut self,
        id: NodeId,
        properties: Properties,
    ) -> Result<Properties, GraphError> {
        let node = self.nodes.get(&id).ok_or(GraphError::NodeNotFound(id))?;
        let mut merged = node.properties.clone();
        merged.extend(properties);
        let labels = node.labels.clone();
        self.check_unique(&labels, &merged, Some(id))?;
        Ok(self.raw_replace_properties(id, merged))
    }

    pub fn create_relationship(
        &mut self,
        rel_type: &str,
        source: NodeId,
        target: NodeId,
        properties: Properties,
    ) -> Result<RelId, GraphError> {
        if rel_type.is_empty() {
            return Err(GraphError::EmptyRelType);
        }
        let src = self.nodes.get(&source).ok_or(GraphError::NodeNotFound(source))?;
        let tgt = self.nodes.get(&target).ok_or(GraphError::NodeNotFound(target))?;
        if let Some(pairs) = self.schema.relationship_types.get(rel_type) {
            let ok = pairs
                .iter()
                .any(|(s, t)| src.labels.contains(s) && tgt.labels.contains(t));
            if !ok {
                return Err(GraphError::SchemaViolation(format!(
                    ":{rel_type} does not connect {} to {}",
                    render_labels(&src.labels),
                    render_labels(&tgt.labels)
                )));
            }
        }
        let id = RelId(self.next_rel);
        self.next_rel += 1;
        self.raw_insert_rel(Relationship {
            id,
            rel_type: rel_type.to_string(),
            source,
            target,
            properties,
        });
        Ok(id)
    }

    /// Deletes a node together with every relationship touching it.
    pub fn delete_node(&mut self, id: NodeId) -> Result<(Node, Vec<Relationship>), GraphError> {
        if !self.nodes.contains_key(&id) {
            return Err(GraphError::NodeNotFound(id));
        }
        let rels: Vec<Relationship> = self
            .incident(id, Direction::Both)
            .into_iter()
            .map(|rid| self.raw_remove_rel(rid))
            .collect();
        Ok((self.raw_remove_node(id), rels))
    }

    pub fn delete_relationship(&mut self, id: RelId) -> Result<Relationship, GraphError> {
        if !self.rels.contains_key(&id) {
            return Err(GraphError::RelNotFound(id));
        }
        Ok(self.raw_remove_rel(id))
    }

    /// First relationship of `rel_type` from `source` to `target`.
    pub fn find_relationship(&self, rel_type: &str, source: NodeId, target: NodeId) -> Option<RelId> {
        self.outgoing.get(&source).and_then(|rids| {
            rids.iter()
                .copied()
                .find(|rid| {
                    let r = &self.rels[rid];
                    r.target == target && r.rel_type == rel_type
                })
        })
    }

    pub fn transaction(&mut self) -> Transaction<'_> {
        Transaction::new(self)
    }

    fn check_unique(
        &self,
        labels: &BTreeSet<String>,
        properties: &Properties,
        exclude: Option<NodeId>,
    ) -> Result<(), GraphError> {
        for c in &self.schema.unique_constraints {
            if !labels.contains(&c.label) {
                continue;
            }
            let Some(v) = properties.get(&c.property) else {
                continue;
            };
            let clash = self
                .index_probe(&c.backing_index(), std::slice::from_ref(v))
                .into_iter()
                .any(|other| Some(other) != exclude);
            if clash {
                return Err(GraphError::UniqueViolation {
                    label: c.label.clone(),
                    property: c.property.clone(),
                    values: vec![v.render()],
                });
            }
        }
        Ok(())
    }

    // ---- raw mutation (no validation) --------------------------------

    fn index_node(&mut self, node: &Node) {
        for label in &node.labels {
            self.by_label.entry(label.clone()).or_default().insert(node.id);
        }
        for (def, table) in self.indexes.iter_mut() {
            if node.labels.contains(&def.label) {
                if let Some(key) = index_key_for(def, &node.properties) {
                    table.entry(key).or_default().insert(node.id);
                }
            }
        }
    }

    fn unindex_node(&mut self, node: &Node) {
        for label in &node.labels {
            if let Some(set) = self.by_label.get_mut(label) {
                set.remove(&node.id);
            }
        }
        for (def, table) in self.indexes.iter_mut() {
            if node.labels.contains(&def.label) {
                if let Some(key) = index_key_for(def, &node.properties) {
                    if let Some(set) = table.get_mut(&key) {
                        set.remove(&node.id);
                        if set.is_empty() {
                            table.remove(&key);
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn raw_insert_node(&mut self, node: Node) {
        self.index_node(&node);
        self.nodes.insert(node.id, node);
    }

    pub(crate) fn raw_remove_node(&mut self, id: NodeId) -> Node {
        let node = self.nodes.remove(&id).expect("node exists");
        self.unindex_node(&node);
        self.outgoing.remove(&id);
        self.incoming.remove(&id);
        node
    }

    pub(crate) fn raw_replace_properties(&mut self, id: NodeId, properties: Properties) -> Properties {
        let node = self.nodes.remove(&id).expect("node exists");
        self.unindex_node(&node);
        let Node { id, labels, properties: old } = node;
        self.raw_insert_node(Node {
            id,
            labels,
            properties,
        });
        old
    }

    pub(crate) fn raw_insert_rel(&mut self, rel: Relationship) {
        self.outgoing.entry(rel.source).or_default().insert(rel.id);
        self.incoming.entry(rel.target).or_default().insert(rel.id);
        self.rels.insert(rel.id, rel);
    }

    pub(crate) fn raw_remove_rel(&mut self, id: RelId) -> Relationship {
        let rel = self.rels.remove(&id).expect("relationship exists");
        if let Some(s) = self.outgoing.get_mut(&rel.source) {
            s.remove(&id);
        }
        if let Some(s) = self.incoming.get_mut(&rel.target) {
            s.remove(&id);
        }
        rel
    }

    pub(crate) fn set_next_ids(&mut self, next_node: u64, next_rel: u64) {
        self.next_node = next_node;
        self.next_rel = next_rel;
    }

    pub(crate) fn set_schema_unchecked(&mut self, schema: GraphSchema) {
        self.schema = schema;
        self.indexes.clear();
        for def in self.schema.indexes.clone() {
            let mut table = IndexTable::new();
            for node in self.nodes.values() {
                if node.labels.contains(&def.label) {
                    if let Some(key) = index_key_for(&def, &node.properties) {
                        table.entry(key).or_default().insert(node.id);
                    }
                }
            }
            self.indexes.insert(def, table);
        }
    }
}

fn index_key_for(def: &IndexDef, props: &Properties) -> Option<Vec<IndexKey>> {
    def.properties
        .iter()
        .map(|p| props.get(p).map(Value::index_key))
        .collect()
}

fn render_labels(labels: &BTreeSet<String>) -> String {
    labels.iter().map(|l| format!(":{l}")).collect::<String>()
}

enum Undo {
    NodeCreated(NodeId),
    PropertiesReplaced(NodeId, Properties),
    RelCreated(RelId),
    NodeDeleted(Node, Vec<Relationship>),
    RelDeleted(Relationship),
}

/// A group of writes that commits as a unit. Dropping an uncommitted
/// transaction rolls every write back, including id allocation.
pub struct Transaction<'g> {
    graph: &'g mut PropertyGraph,
    undo: Vec<Undo>,
    saved_ids: (u64, u64),
    finished: bool,
}

impl<'g> Transaction<'g> {
    fn new(graph: &'g mut PropertyGraph) -> Self {
        let saved_ids = graph.next_ids();
        Self {
            graph,
            undo: Vec::new(),
            saved_ids,
            finished: false,
        }
    }

    pub fn graph(&self) -> &PropertyGraph {
        self.graph
    }

    pub fn write_count(&self) -> usize {
        self.undo.len()
    }

    pub fn create_node(
        &mut self,
        labels: impl IntoIterator<Item = impl Into<String>>,
        properties: Properties,
    ) -> Result<NodeId, GraphError> {
        let id = self.graph.create_node(labels, properties)?;
        self.undo.push(Undo::NodeCreated(id));
        Ok(id)
    }

    pub fn set_properties(&mut self, id: NodeId, properties: Properties) -> Result<(), GraphError> {
        let old = self.graph.set_properties(id, properties)?;
        self.undo.push(Undo::PropertiesReplaced(id, old));
        Ok(())
    }

    pub fn create_relationship(
        &mut self,
        rel_type: &str,
        source: NodeId,
        target: NodeId,
        properties: Properties,
    ) -> Result<RelId, GraphError> {
        let id = self
            .graph
            .create_relationship(rel_type, source, target, properties)?;
        self.undo.push(Undo::RelCreated(id));
        Ok(id)
    }

    pub fn delete_node(&mut self, id: NodeId) -> Result<(), GraphError> {
        let (node, rels) = self.graph.delete_node(id)?;
        self.undo.push(Undo::NodeDeleted(node, rels));
        Ok(())
    }

    pub fn delete_relationship(&mut self, id: RelId) -> Result<(), GraphError> {
        let rel = self.graph.delete_relationship(id)?;
        self.undo.push(Undo::RelDeleted(rel));
        Ok(())
    }

    pub fn commit(mut self) {
        self.finished = true;
        self.undo.clear();
    }

    pub fn rollback(mut self) {
        self.undo_all();
    }

    fn undo_all(&mut self) {
        while let Some(op) = self.undo.pop() {
            match op {
                Undo::NodeCreated(id) => {
                    self.graph.raw_remove_node(id);
                }
                Undo::PropertiesReplaced(id, old) => {
                    self.graph.raw_replace_properties(id, old);
                }
                Undo::RelCreated(id) => {
                    self.graph.raw_remove_rel(id);
                }
                Undo::NodeDeleted(node, rels) => {
                    self.graph.raw_insert_node(node);
                    for r in rels {
                        self.graph.raw_insert_rel(r);
                    }
                }
                Undo::RelDeleted(rel) => self.graph.raw_insert_rel(rel),
            }
        }
        let (n, r) = self.saved_ids;
        self.graph.set_next_ids(n, r);
        self.finished = true;
    }
}

impl Drop for Transaction<'_> {
    fn drop(&mut self) {
        if !self.finished {
            self.undo_all();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn props(pairs: &[(&str, Value)]) -> Properties {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    fn path_graph() -> (PropertyGraph, NodeId, NodeId, NodeId) {
        let mut g = PropertyGraph::new();
        let a = g.create_node(["N"], Properties::new()).unwrap();
        let b = g.create_node(["N"], Properties::new()).unwrap();
        let c = g.create_node(["N"], Properties::new()).unwrap();
        g.create_relationship("NEXT", a, b, Properties::new()).unwrap();
        g.create_relationship("NEXT", b, c, Properties::new()).unwrap();
        (g, a, b, c)
    }

    #[test]
    fn expand_isolated_node_is_empty() {
        let mut g = PropertyGraph::new();
        let x = g.create_node(["N"], Properties::new()).unwrap();
        let e = g.expand(x, None, Direction::Outgoing, 1, 1);
        assert!(e.ids.is_empty());
    }

    #[test]
    fn expand_path_two_hops() {
        let (g, a, b, c) = path_graph();
        assert_eq!(g.expand(a, None, Direction::Outgoing, 1, 2).ids, vec![b, c]);
        assert_eq!(g.expand(a, None, Direction::Outgoing, 0, 1).ids, vec![a, b]);
        assert_eq!(g.expand(c, None, Direction::Incoming, 2, 2).ids, vec![a]);
    }

    #[test]
    fn expand_unknown_type_warns() {
        let (g, a, _, _) = path_graph();
        let e = g.expand(a, Some("NOPE"), Direction::Outgoing, 1, 3);
        assert!(e.ids.is_empty());
        assert_eq!(e.warnings, vec!["unknown relationship type :NOPE".to_string()]);
    }

    #[test]
    fn unique_violation_names_value() {
        let mut g = PropertyGraph::with_schema(GraphSchema::new().unique("Aircraft", "registration"));
        g.create_node(["Aircraft"], props(&[("registration", "N12345".into())]))
            .unwrap();
        let err = g
            .create_node(["Aircraft"], props(&[("registration", "N12345".into())]))
            .unwrap_err();
        assert!(err.to_string().contains("N12345"));
        assert_eq!(g.node_count(), 1);
    }

    #[test]
    fn retroactive_constraint_lists_offenders() {
        let mut g = PropertyGraph::new();
        for _ in 0..2 {
            g.create_node(["Aircraft"], props(&[("registration", "N12345".into())]))
                .unwrap();
        }
        let before = g.clone();
        let err = g
            .apply_schema(&GraphSchema::new().unique("Aircraft", "registration"))
            .unwrap_err();
        match err {
            GraphError::UniqueViolation { values, .. } => assert_eq!(values, vec!["N12345"]),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(g, before);
    }

    #[test]
    fn apply_schema_is_idempotent() {
        let mut g = PropertyGraph::new();
        let first = g.apply_schema(&GraphSchema::aviation()).unwrap();
        assert!(first.changed);
        assert_eq!(first.unique_constraints.len(), 2);
        assert!(first.indexes.len() >= 3);
        let snapshot = g.clone();
        let second = g.apply_schema(&GraphSchema::aviation()).unwrap();
        assert!(!second.changed);
        assert_eq!(g, snapshot);
    }

    #[test]
    fn delete_node_removes_incident_relationships() {
        let (mut g, _, b, _) = path_graph();
        g.delete_node(b).unwrap();
        assert_eq!(g.relationship_count(), 0);
        for r in g.relationships() {
            assert!(g.contains_node(r.source) && g.contains_node(r.target));
        }
    }

    #[test]
    fn relationship_schema_checks_endpoints() {
        let mut g = PropertyGraph::with_schema(GraphSchema::aviation());
        let acc = g
            .create_node(["Accident"], props(&[("event_id", "E1".into())]))
            .unwrap();
        let ap = g.create_node(["Airport"], props(&[("icao", "KLAX".into())])).unwrap();
        assert!(g.create_relationship("OCCURRED_AT", acc, ap, Properties::new()).is_ok());
        assert!(matches!(
            g.create_relationship("OCCURRED_AT", ap, acc, Properties::new()),
            Err(GraphError::SchemaViolation(_))
        ));
    }

    #[test]
    fn dropped_transaction_rolls_back() {
        let (mut g, a, b, _) = path_graph();
        let before = g.clone();
        {
            let mut tx = g.transaction();
            let n = tx.create_node(["N"], props(&[("k", 1i64.into())])).unwrap();
            tx.create_relationship("NEXT", n, a, Properties::new()).unwrap();
            tx.set_properties(b, props(&[("k", 2i64.into())])).unwrap();
            tx.delete_node(a).unwrap();
        }
        assert_eq!(g, before);
        assert_eq!(g.lookup_scan("N", "k", &Value::Int(2)).ids, Vec::<NodeId>::new());
    }

    #[test]
    fn composite_index_used_for_full_binding() {
        let mut g = PropertyGraph::with_schema(GraphSchema::aviation());
        let id = g
            .create_node(
                ["Aircraft"],
                props(&[
                    ("registration", "N1".into()),
                    ("make", "Boeing".into()),
                    ("model", "737-800".into()),
                ]),
            )
            .unwrap();
        let l = g.lookup_composite(
            "Aircraft",
            &[
                ("model".into(), "737-800".into()),
                ("make".into(), "Boeing".into()),
            ],
        );
        assert_eq!(l.ids, vec![id]);
        assert_eq!(l.used_index, Some(IndexDef::new("Aircraft", &["make", "model"])));
    }
}
