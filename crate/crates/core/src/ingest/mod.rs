//! CSV ingestion into a validated staging set.

mod fixture;
mod manifest;
mod parse;
mod record;

use std::path::PathBuf;

pub use fixture::{
    counts_path, gen_fixture, parse_truth, render_fixture, render_truth, truth_path, AliasCluster, Fixture,
    FixtureCounts, FixtureSpec,
};
pub use manifest::{ColumnManifest, COLUMN_COUNT, TYPED_COLUMNS};
pub use parse::{
    load_staging, parse_bytes, parse_csv, save_staging, write_csv, Provenance, Reject, StagingSet, MANIFEST_JSON,
    REJECTS_TSV, STAGING_CSV,
};
pub use record::{is_code_column, normalize_field, parse_date, InjuryLevel, RawRecord};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("header does not match the column manifest (absent: [{}]; extra: [{}])", absent.join(", "), extra.join(", "))]
    HeaderMismatch { absent: Vec<String>, extra: Vec<String> },
    #[error("{rejected} of {total} rows rejected, more than half")]
    TooManyRejects { rejected: usize, total: usize },
    #[error("invalid column manifest: {0}")]
    Manifest(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
