use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::IngestError;

pub const COLUMN_COUNT: usize = 38;

/// Columns the parser validates and maps onto [`super::RawRecord`] fields.
pub const TYPED_COLUMNS: [&str; 13] = [
    "event_id",
    "event_type",
    "event_date",
    "event_year",
    "city",
    "state",
    "airport_icao",
    "acft_make",
    "acft_model",
    "registration",
    "operator_name",
    "injury_level",
    "probable_cause",
];

const DEFAULT_MANIFEST: &str = include_str!("../../data/columns.txt");

/// Ordered, distinct column names. Always contains every typed column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnManifest {
    columns: Vec<String>,
}

impl ColumnManifest {
    pub fn new(columns: Vec<String>) -> Result<Self, IngestError> {
        if columns.len() != COLUMN_COUNT {
            return Err(IngestError::Manifest(format!(
                "expected {COLUMN_COUNT} columns, found {}",
                columns.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(IngestError::Manifest(format!("duplicate column `{c}`")));
            }
        }
        if let Some(missing) = TYPED_COLUMNS.iter().find(|t| !seen.contains(**t)) {
            return Err(IngestError::Manifest(format!("missing typed column `{missing}`")));
        }
        Ok(Self { columns })
    }

    /// Parses the manifest file format: one `name<TAB>kind` per line, `#`
    /// comments and blank lines skipped. The kind column is informational.
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let columns = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.split('\t').next().unwrap_or(l).trim().to_string())
            .collect();
        Self::new(columns)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn position(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    pub fn passthrough(&self) -> impl Iterator<Item = &str> {
        self.columns
            .iter()
            .map(String::as_str)
            .filter(|c| !TYPED_COLUMNS.contains(c))
    }
}

impl Default for ColumnManifest {
    fn default() -> Self {
        Self::parse(DEFAULT_MANIFEST).expect("checked-in manifest is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_manifest_has_38_distinct_columns() {
        let m = ColumnManifest::default();
        assert_eq!(m.columns().len(), 38);
        assert_eq!(m.passthrough().count(), 25);
        assert_eq!(m.columns()[0], "event_id");
    }

    #[test]
    fn rejects_duplicates_and_short_lists() {
        let mut cols: Vec<String> = ColumnManifest::default().columns().to_vec();
        cols[1] = cols[0].clone();
        assert!(matches!(ColumnManifest::new(cols), Err(IngestError::Manifest(_))));
        assert!(ColumnManifest::new(vec!["event_id".into()]).is_err());
    }
}
