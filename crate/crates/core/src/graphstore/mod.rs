//! Labelled property graph: storage, schema, bulk import and snapshots.

mod import;
mod schema;
mod shared;
mod snapshot;
mod store;
mod value;

pub use import::{
    bulk_import, bulk_import_with_hook, BulkImporter, ImportBatch, ImportFailure, ImportReport,
    NodeKey, NodeSpec, RelSpec,
};
pub use schema::{GraphSchema, IndexDef, SchemaReport, UniqueConstraint};
pub use shared::{GraphObserver, SharedGraph};
pub use snapshot::{decode, encode, snapshot_load, snapshot_save, SnapshotError, FORMAT_VERSION};
pub use store::{
    Direction, Expansion, GraphError, GraphStats, Lookup, Node, NodeId, Properties,
    PropertyGraph, RelId, Relationship, Transaction,
};
pub use value::{compare_values, format_float, IndexKey, Value};
