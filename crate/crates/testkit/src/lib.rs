//! Reference oracles and random instance generators.
//!
//! Everything here is deliberately naive: the oracles enumerate
//! assignments and scan edge lists instead of using the engine's indexes,
//! adjacency sets or planner.

pub mod graphgen;
pub mod oracle;
pub mod querygen;
pub mod reach;

pub use graphgen::{random_graph, GraphGenOptions};
pub use oracle::{oracle_run, OracleResult};
pub use querygen::random_query;
pub use reach::{oracle_distances, oracle_expand};
