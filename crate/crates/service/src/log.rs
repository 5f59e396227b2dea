//! Append-only query log. Recent entries stay in memory for `/api/stats`;
//! with a path configured every entry is also appended as one JSON line.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// Entries kept in memory; the total count keeps growing past it.
pub const RETAINED: usize = 1000;
pub const RECENT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLogEntry {
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub session_id: String,
    pub question: String,
    /// Absent when translation failed.
    pub query: Option<String>,
    /// `exact`, `plan`, `semantic`, `miss`, or `skipped` when nothing ran.
    pub cache: String,
    pub rows: usize,
    pub elapsed_ms: f64,
    pub verified: bool,
    /// `ok`, or the failure kind.
    pub outcome: String,
    pub warnings: Vec<String>,
}

struct Inner {
    recent: VecDeque<QueryLogEntry>,
    total: usize,
    file: Option<File>,
}

pub struct QueryLog {
    inner: Mutex<Inner>,
}

impl QueryLog {
    pub fn in_memory() -> Self {
        QueryLog {
            inner: Mutex::new(Inner {
                recent: VecDeque::new(),
                total: 0,
                file: None,
            }),
        }
    }

    pub fn with_file(path: &Path) -> std::io::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let log = QueryLog::in_memory();
        log.lock().file = Some(file);
        Ok(log)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// A failed file append is reported on stderr; the in-memory log and
    /// the count still advance, so the count always equals invocations.
    pub fn append(&self, entry: QueryLogEntry) {
        let mut inner = self.lock();
        if let Some(f) = inner.file.as_mut() {
            let line = serde_json::to_string(&entry).expect("log entries serialize");
            if let Err(e) = writeln!(f, "{line}") {
                eprintln!("query log append failed: {e}");
            }
        }
        inner.total += 1;
        inner.recent.push_back(entry);
        if inner.recent.len() > RETAINED {
            inner.recent.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.lock().total
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Newest last.
    pub fn recent(&self, n: usize) -> Vec<QueryLogEntry> {
        let inner = self.lock();
        let skip = inner.recent.len().saturating_sub(n);
        inner.recent.iter().skip(skip).cloned().collect()
    }
}
