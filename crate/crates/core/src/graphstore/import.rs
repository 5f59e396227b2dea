//! Batched, transactional bulk import with upsert-by-key semantics.

use std::collections::HashMap;

use serde::Serialize;

use super::store::{GraphError, NodeId, Properties, PropertyGraph};
use super::value::{IndexKey, Value};

/// Identifies a node by a key property on one label.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeKey {
    pub label: String,
    pub property: String,
    pub value: Value,
}

impl NodeKey {
    pub fn new(label: &str, property: &str, value: impl Into<Value>) -> Self {
        Self {
            label: label.to_string(),
            property: property.to_string(),
            value: value.into(),
        }
    }

    fn slot(&self) -> (String, String, IndexKey) {
        (
            self.label.clone(),
            self.property.clone(),
            self.value.index_key(),
        )
    }

    fn describe(&self) -> String {
        format!(":{}({}={})", self.label, self.property, self.value.render())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub key: NodeKey,
    /// Properties besides the key; the key property is added on write.
    pub properties: Properties,
}

impl NodeSpec {
    pub fn new(key: NodeKey, properties: Properties) -> Self {
        Self { key, properties }
    }

    fn full_properties(&self) -> Properties {
        let mut p = self.properties.clone();
        p.insert(self.key.property.clone(), self.key.value.clone());
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelSpec {
    pub rel_type: String,
    pub source: NodeKey,
    pub target: NodeKey,
    pub properties: Properties,
}

impl RelSpec {
    pub fn new(rel_type: &str, source: NodeKey, target: NodeKey) -> Self {
        Self {
            rel_type: rel_type.to_string(),
            source,
            target,
            properties: Properties::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportBatch {
    pub nodes: Vec<NodeSpec>,
    pub relationships: Vec<RelSpec>,
    /// Writes per transaction.
    pub batch_size: usize,
}

impl ImportBatch {
    pub const DEFAULT_BATCH_SIZE: usize = 500;

    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            relationships: Vec::new(),
            batch_size: Self::DEFAULT_BATCH_SIZE,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn op_count(&self) -> usize {
        self.nodes.len() + self.relationships.len()
    }

    pub fn transaction_count(&self) -> usize {
        self.op_count().div_ceil(self.batch_size.max(1))
    }
}

impl Default for ImportBatch {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImportFailure {
    pub transaction: usize,
    pub item: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImportReport {
    pub nodes_created: usize,
    pub nodes_updated: usize,
    pub nodes_matched: usize,
    pub relationships_created: usize,
    pub relationships_matched: usize,
    pub relationships_failed: usize,
    pub transactions_committed: usize,
    pub transactions_failed: usize,
    pub constraint_failures: usize,
    pub failures: Vec<ImportFailure>,
}

impl ImportReport {
    pub fn created(&self) -> usize {
        self.nodes_created + self.relationships_created
    }

    fn absorb(&mut self, other: &ImportReport) {
        self.nodes_created += other.nodes_created;
        self.nodes_updated += other.nodes_updated;
        self.nodes_matched += other.nodes_matched;
        self.relationships_created += other.relationships_created;
        self.relationships_matched += other.relationships_matched;
        self.relationships_failed += other.relationships_failed;
        self.failures.extend(other.failures.iter().cloned());
    }
}

#[derive(Debug, Clone, Copy)]
enum Op<'b> {
    Node(&'b NodeSpec),
    Rel(&'b RelSpec),
}

/// Drives an [`ImportBatch`] one transaction at a time so callers can take
/// and release a writer lock around each chunk.
pub struct BulkImporter<'b> {
    batch: &'b ImportBatch,
    ops: Vec<Op<'b>>,
    /// Properties claimed for each key earlier in this import.
    claimed: HashMap<(String, String, IndexKey), Properties>,
    report: ImportReport,
}

impl<'b> BulkImporter<'b> {
    pub fn new(batch: &'b ImportBatch) -> Self {
        let ops = batch
            .nodes
            .iter()
            .map(Op::Node)
            .chain(batch.relationships.iter().map(Op::Rel))
            .collect();
        Self {
            batch,
            ops,
            claimed: HashMap::new(),
            report: ImportReport::default(),
        }
    }

    pub fn transaction_count(&self) -> usize {
        self.batch.transaction_count()
    }

    /// Runs transaction `index`. `hook` is consulted before every write with
    /// the global operation index; an error from it fails the transaction.
    pub fn run_transaction(
        &mut self,
        graph: &mut PropertyGraph,
        index: usize,
        hook: &mut dyn FnMut(usize) -> Result<(), GraphError>,
    ) {
        let size = self.batch.batch_size.max(1);
        let start = index * size;
        let end = (start + size).min(self.ops.len());
        let mut local = ImportReport::default();
        let mut claims: Vec<((String, String, IndexKey), Properties)> = Vec::new();
        let mut tx = graph.transaction();
        let mut failure: Option<(String, GraphError)> = None;

        for op_index in start..end {
            if let Err(e) = hook(op_index) {
                failure = Some((format!("operation {op_index}"), e));
                break;
            }
            match self.ops[op_index] {
                Op::Node(spec) => {
                    let slot = spec.key.slot();
                    let props = spec.full_properties();
                    let prior = claims
                        .iter()
                        .rev()
                        .find(|(s, _)| *s == slot)
                        .map(|(_, p)| p)
                        .or_else(|| self.claimed.get(&slot));
                    if let Some(prior) = prior {
                        let conflicting = props
                            .iter()
                            .any(|(k, v)| prior.get(k).is_some_and(|pv| pv != v));
                        let constrained = tx
                            .graph()
                            .schema()
                            .unique_constraints
                            .iter()
                            .any(|c| c.label == spec.key.label && c.property == spec.key.property);
                        if conflicting && constrained {
                            failure = Some((
                                spec.key.describe(),
                                GraphError::UniqueViolation {
                                    label: spec.key.label.clone(),
                                    property: spec.key.property.clone(),
                                    values: vec![spec.key.value.render()],
                                },
                            ));
                            break;
                        }
                    }
                    match upsert(&mut tx, spec, props.clone()) {
                        Ok(Upsert::Created) => local.nodes_created += 1,
                        Ok(Upsert::Updated) => local.nodes_updated += 1,
                        Ok(Upsert::Matched) => local.nodes_matched += 1,
                        Err(e) => {
                            failure = Some((spec.key.describe(), e));
                            break;
                        }
                    }
                    claims.push((slot, props));
                }
                Op::Rel(spec) => {
                    let src = resolve_key(tx.graph(), &spec.source);
                    let tgt = resolve_key(tx.graph(), &spec.target);
                    let (Some(src), Some(tgt)) = (src, tgt) else {
                        local.relationships_failed += 1;
                        local.failures.push(ImportFailure {
                            transaction: index,
                            item: format!(
                                "{}-[:{}]->{}",
                                spec.source.describe(),
                                spec.rel_type,
                                spec.target.describe()
                            ),
                            reason: "endpoint key did not resolve".to_string(),
                        });
                        continue;
                    };
                    if tx.graph().find_relationship(&spec.rel_type, src, tgt).is_some() {
                        local.relationships_matched += 1;
                        continue;
                    }
                    if let Err(e) =
                        tx.create_relationship(&spec.rel_type, src, tgt, spec.properties.clone())
                    {
                        failure = Some((format!(":{}", spec.rel_type), e));
                        break;
                    }
                    local.relationships_created += 1;
                }
            }
        }

        match failure {
            None => {
                tx.commit();
                self.report.transactions_committed += 1;
                self.report.absorb(&local);
                for (slot, props) in claims {
                    self.claimed.insert(slot, props);
                }
            }
            Some((item, err)) => {
                tx.rollback();
                self.report.transactions_failed += 1;
                if matches!(err, GraphError::UniqueViolation { .. }) {
                    self.report.constraint_failures += 1;
                }
                self.report.failures.push(ImportFailure {
                    transaction: index,
                    item,
                    reason: err.to_string(),
                });
            }
        }
    }

    pub fn finish(self) -> ImportReport {
        self.report
    }
}

enum Upsert {
    Created,
    Updated,
    Matched,
}

fn upsert(
    tx: &mut super::store::Transaction<'_>,
    spec: &NodeSpec,
    props: Properties,
) -> Result<Upsert, GraphError> {
    match resolve_key(tx.graph(), &spec.key) {
        Some(id) => {
            let node = tx.graph().node(id).expect("resolved node exists");
            let unchanged = props
                .iter()
                .all(|(k, v)| node.properties.get(k) == Some(v));
            if unchanged {
                Ok(Upsert::Matched)
            } else {
                tx.set_properties(id, props)?;
                Ok(Upsert::Updated)
            }
        }
        None => {
            tx.create_node([spec.key.label.clone()], props)?;
            Ok(Upsert::Created)
        }
    }
}

fn resolve_key(graph: &PropertyGraph, key: &NodeKey) -> Option<NodeId> {
    graph
        .lookup(&key.label, &key.property, &key.value)
        .ids
        .first()
        .copied()
}

/// Imports `batch` into `graph`, one transaction per `batch_size` writes.
/// A failed transaction is rolled back and reported; later ones proceed.
pub fn bulk_import(graph: &mut PropertyGraph, batch: &ImportBatch) -> ImportReport {
    bulk_import_with_hook(graph, batch, &mut |_| Ok(()))
}

pub fn bulk_import_with_hook(
    graph: &mut PropertyGraph,
    batch: &ImportBatch,
    hook: &mut dyn FnMut(usize) -> Result<(), GraphError>,
) -> ImportReport {
    let mut importer = BulkImporter::new(batch);
    for i in 0..importer.transaction_count() {
        importer.run_transaction(graph, i, hook);
    }
    importer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphstore::GraphSchema;

    fn aircraft(reg: &str, make: &str) -> NodeSpec {
        let mut p = Properties::new();
        p.insert("make".into(), make.into());
        NodeSpec::new(NodeKey::new("Aircraft", "registration", reg), p)
    }

    fn accident(id: &str) -> NodeSpec {
        NodeSpec::new(NodeKey::new("Accident", "event_id", id), Properties::new())
    }

    fn sample_batch() -> ImportBatch {
        let mut b = ImportBatch::new().with_batch_size(2);
        b.nodes.push(aircraft("N1", "Boeing"));
        b.nodes.push(aircraft("N2", "Cessna"));
        b.nodes.push(accident("E1"));
        b.relationships.push(RelSpec::new(
            "INVOLVED_IN",
            NodeKey::new("Aircraft", "registration", "N1"),
            NodeKey::new("Accident", "event_id", "E1"),
        ));
        b
    }

    #[test]
    fn reimport_creates_nothing() {
        let mut g = PropertyGraph::with_schema(GraphSchema::aviation());
        let first = bulk_import(&mut g, &sample_batch());
        assert_eq!(first.nodes_created, 3);
        assert_eq!(first.relationships_created, 1);
        let second = bulk_import(&mut g, &sample_batch());
        assert_eq!(second.created(), 0);
        assert_eq!(second.nodes_matched + second.nodes_updated, 3);
        assert_eq!(second.relationships_matched, 1);
    }

    #[test]
    fn duplicate_registration_keeps_one_node() {
        let mut g = PropertyGraph::with_schema(GraphSchema::aviation());
        let mut b = ImportBatch::new().with_batch_size(1);
        b.nodes.push(aircraft("N12345", "Boeing"));
        b.nodes.push(aircraft("N12345", "Cessna"));
        let report = bulk_import(&mut g, &b);
        assert_eq!(g.nodes_with_label("Aircraft").len(), 1);
        assert_eq!(report.constraint_failures, 1);
        assert!(report.failures[0].reason.contains("N12345"));
    }

    #[test]
    fn unresolved_endpoint_is_counted_not_fatal() {
        let mut g = PropertyGraph::with_schema(GraphSchema::aviation());
        let mut b = sample_batch();
        b.relationships.push(RelSpec::new(
            "INVOLVED_IN",
            NodeKey::new("Aircraft", "registration", "N404"),
            NodeKey::new("Accident", "event_id", "E1"),
        ));
        let r = bulk_import(&mut g, &b);
        assert_eq!(r.relationships_failed, 1);
        assert_eq!(r.transactions_failed, 0);
        assert_eq!(r.relationships_created, 1);
    }

    #[test]
    fn failed_transaction_leaves_no_partial_writes() {
        let mut g = PropertyGraph::with_schema(GraphSchema::aviation());
        let b = sample_batch();
        // Transaction 1 holds ops 2 and 3; fail on op 3.
        let mut hook = |i: usize| {
            if i == 3 {
                Err(GraphError::Injected("boom".into()))
            } else {
                Ok(())
            }
        };
        let r = bulk_import_with_hook(&mut g, &b, &mut hook);
        assert_eq!(r.transactions_committed, 1);
        assert_eq!(r.transactions_failed, 1);
        assert_eq!(g.node_count(), 2);
        assert!(g.lookup("Accident", "event_id", &"E1".into()).ids.is_empty());
        assert_eq!(g.relationship_count(), 0);
    }
}
