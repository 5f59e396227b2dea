//! Thread-safe handle around a [`PropertyGraph`].
//!
//! Readers share a read lock; every write takes the writer lock and, once it
//! returns, notifies registered observers. Observers are called after the
//! lock is released.

use std::sync::{Arc, RwLock, RwLockReadGuard};

use super::import::{BulkImporter, ImportBatch, ImportReport};
use super::schema::{GraphSchema, SchemaReport};
use super::store::{GraphError, PropertyGraph};

/// Receives write notifications. `on_schema_change` is called in addition
/// to `on_write` when constraints, indexes or labels change.
pub trait GraphObserver: Send + Sync {
    fn on_write(&self);
    fn on_schema_change(&self);
}

#[derive(Clone)]
pub struct SharedGraph {
    inner: Arc<RwLock<PropertyGraph>>,
    observers: Arc<RwLock<Vec<Arc<dyn GraphObserver>>>>,
}

impl Default for SharedGraph {
    fn default() -> Self {
        Self::new(PropertyGraph::new())
    }
}

impl SharedGraph {
    pub fn new(graph: PropertyGraph) -> Self {
        Self {
            inner: Arc::new(RwLock::new(graph)),
            observers: Arc::new(RwLock::new(Vec::new())),
        }
    }

    pub fn subscribe(&self, observer: Arc<dyn GraphObserver>) {
        self.observers
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .push(observer);
    }

    pub fn read(&self) -> RwLockReadGuard<'_, PropertyGraph> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `f` under the writer lock, then notifies observers of a write.
    pub fn write<R>(&self, f: impl FnOnce(&mut PropertyGraph) -> R) -> R {
        let out = {
            let mut g = self.inner.write().unwrap_or_else(|e| e.into_inner());
            f(&mut g)
        };
        self.notify(false);
        out
    }

    pub fn apply_schema(&self, schema: &GraphSchema) -> Result<SchemaReport, GraphError> {
        let report = {
            let mut g = self.inner.write().unwrap_or_else(|e| e.into_inner());
            g.apply_schema(schema)?
        };
        if report.changed {
            self.notify(true);
        }
        Ok(report)
    }

    /// Swaps in a whole graph (snapshot load or rebuild).
    pub fn replace(&self, graph: PropertyGraph) {
        *self.inner.write().unwrap_or_else(|e| e.into_inner()) = graph;
        self.notify(true);
    }

    /// Bulk import that holds the writer lock for one transaction at a time,
    /// so readers can interleave between chunks.
    pub fn bulk_import(&self, batch: &ImportBatch) -> ImportReport {
        let mut importer = BulkImporter::new(batch);
        for i in 0..importer.transaction_count() {
            let mut g = self.inner.write().unwrap_or_else(|e| e.into_inner());
            importer.run_transaction(&mut g, i, &mut |_| Ok(()));
        }
        let report = importer.finish();
        if report.created() > 0 || report.nodes_updated > 0 {
            self.notify(false);
        }
        report
    }

    fn notify(&self, schema_changed: bool) {
        let observers = self.observers.read().unwrap_or_else(|e| e.into_inner());
        for o in observers.iter() {
            o.on_write();
            if schema_changed {
                o.on_schema_change();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphstore::{NodeKey, NodeSpec, Properties};
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[derive(Default)]
    struct Counter {
        writes: AtomicUsize,
        schema: AtomicUsize,
    }

    impl GraphObserver for Counter {
        fn on_write(&self) {
            self.writes.fetch_add(1, Ordering::SeqCst);
        }
        fn on_schema_change(&self) {
            self.schema.fetch_add(1, Ordering::SeqCst);
        }
    }

    #[test]
    fn observers_see_writes_and_schema_changes() {
        let shared = SharedGraph::default();
        let counter = Arc::new(Counter::default());
        shared.subscribe(counter.clone());

        shared.apply_schema(&GraphSchema::aviation()).unwrap();
        assert_eq!(counter.schema.load(Ordering::SeqCst), 1);
        shared.apply_schema(&GraphSchema::aviation()).unwrap();
        assert_eq!(counter.schema.load(Ordering::SeqCst), 1);

        let mut batch = ImportBatch::new();
        batch.nodes.push(NodeSpec::new(
            NodeKey::new("Aircraft", "registration", "N1"),
            Properties::new(),
        ));
        let report = shared.bulk_import(&batch);
        assert_eq!(report.nodes_created, 1);
        assert_eq!(counter.writes.load(Ordering::SeqCst), 2);
        assert_eq!(shared.read().node_count(), 1);

        shared.bulk_import(&batch);
        assert_eq!(counter.writes.load(Ordering::SeqCst), 2);
    }
}
