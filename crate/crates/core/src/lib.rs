//! Aviation safety knowledge graph core.

pub mod annotate;
pub mod build;
pub mod cache;
pub mod cypher;
pub mod graphstore;
pub mod ground;
pub mod ingest;
pub mod resolve;
pub mod translate;
