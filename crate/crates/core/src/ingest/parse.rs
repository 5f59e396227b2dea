use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::manifest::{ColumnManifest, COLUMN_COUNT};
use super::record::{normalize_field, parse_date, InjuryLevel, RawRecord};
use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: String,
    /// Hex SHA-256 of the file bytes.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line on which the row starts.
    pub line: u64,
    pub reason: String,
}

/// Parsed records in file order. `records.len()` equals data rows minus
/// `rejects.len()`; event ids are unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagingSet {
    pub records: Vec<RawRecord>,
    pub manifest: ColumnManifest,
    pub provenance: Provenance,
    pub rejects: Vec<Reject>,
}

pub fn parse_csv(path: &Path, manifest: &ColumnManifest) -> Result<StagingSet, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_bytes(&bytes, &path.display().to_string(), manifest)
}

/// Parses CSV content already in memory; `source` is recorded as the
/// provenance path.
pub fn parse_bytes(
    bytes: &[u8],
    source: &str,
    manifest: &ColumnManifest,
) -> Result<StagingSet, IngestError> {
    let provenance = Provenance {
        path: source.to_string(),
        sha256: hex::encode(Sha256::digest(bytes)),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(h) => h?,
        None => {
            return Err(IngestError::HeaderMismatch {
                absent: manifest.columns().to_vec(),
                extra: Vec::new(),
            })
        }
    };
    let order = match_header(&header, manifest)?;

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut total = 0usize;
    for row in rows {
        let row = row?;
        total += 1;
        let line = row.position().map_or(0, |p| p.line());
        match build_record(&row, &order, manifest, &seen_ids) {
            Ok(r) => {
                seen_ids.insert(r.event_id.clone());
                records.push(r);
            }
            Err(reason) => rejects.push(Reject { line, reason }),
        }
    }
    if rejects.len() * 2 > total {
        return Err(IngestError::TooManyRejects {
            rejected: rejects.len(),
            total,
        });
    }
    Ok(StagingSet {
        records,
        manifest: manifest.clone(),
        provenance,
        rejects,
    })
}

/// Maps file column positions to manifest names. Matching is on trimmed,
/// lower-cased names; order may differ from the manifest.
fn match_header(header: &csv::StringRecord, manifest: &ColumnManifest) -> Result<Vec<String>, IngestError> {
    let got: Vec<String> = header.iter().map(|h| h.trim().to_lowercase()).collect();
    let want: BTreeSet<&str> = manifest.columns().iter().map(String::as_str).collect();
    let got_set: BTreeSet<&str> = got.iter().map(String::as_str).collect();
    let absent: Vec<String> = want.difference(&got_set).map(|s| s.to_string()).collect();
    let mut extra: Vec<String> = got_set.difference(&want).map(|s| s.to_string()).collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for g in &got {
        *counts.entry(g).or_default() += 1;
    }
    extra.extend(counts.iter().filter(|(_, n)| **n > 1).map(|(c, _)| format!("{c} (duplicate)")));
    if !absent.is_empty() || !extra.is_empty() {
        return Err(IngestError::HeaderMismatch { absent, extra });
    }
    Ok(got)
}

fn build_record(
    row: &csv::StringRecord,
    order: &[String],
    manifest: &ColumnManifest,
    seen_ids: &HashSet<String>,
) -> Result<RawRecord, String> {
    if row.len() != COLUMN_COUNT {
        return Err(format!("expected {COLUMN_COUNT} fields, found {}", row.len()));
    }
    let mut f: BTreeMap<&str, String> = BTreeMap::new();
    for (name, raw) in order.iter().zip(row.iter()) {
        f.insert(name.as_str(), normalize_field(name, raw));
    }
    let mut take = |c: &str| f.remove(c).unwrap_or_default();

    let event_id = take("event_id");
    if event_id.is_empty() {
        return Err("missing event_id".into());
    }
    if seen_ids.contains(&event_id) {
        return Err(format!("duplicate event_id {event_id}"));
    }
    let date_text = take("event_date");
    if date_text.is_empty() {
        return Err("missing event_date".into());
    }
    let event_date =
        parse_date(&date_text).ok_or_else(|| format!("unparseable event_date `{date_text}`"))?;
    let year_text = take("event_year");
    let event_year = if year_text.is_empty() {
        chrono::Datelike::year(&event_date)
    } else {
        let y: i32 = year_text
            .parse()
            .map_err(|_| format!("event_year `{year_text}` is not an integer"))?;
        if y != chrono::Datelike::year(&event_date) {
            return Err(format!("event_year {y} disagrees with event_date {date_text}"));
        }
        y
    };
    let icao = take("airport_icao");
    if !icao.is_empty() && (icao.len() != 4 || !icao.chars().all(|c| c.is_ascii_alphanumeric())) {
        return Err(format!("airport_icao `{icao}` is not a 4-character code"));
    }
    let injury_text = take("injury_level");
    let injury_level = if injury_text.is_empty() {
        None
    } else {
        Some(injury_text.parse::<InjuryLevel>()?)
    };
    let record = RawRecord {
        event_id,
        event_type: take("event_type"),
        event_date,
        event_year,
        city: take("city"),
        state: take("state"),
        airport_icao: icao,
        acft_make: take("acft_make"),
        acft_model: take("acft_model"),
        registration: take("registration"),
        operator_name: take("operator_name"),
        injury_level,
        probable_cause: take("probable_cause"),
        extra: manifest
            .passthrough()
            .map(|c| (c.to_string(), f.remove(c).unwrap_or_default()))
            .collect(),
    };
    Ok(record)
}

/// Writes records with a manifest-order header. Parsing the output yields
/// the same records.
pub fn write_csv<W: Write>(set: &StagingSet, out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(set.manifest.columns())?;
    for r in &set.records {
        w.write_record(set.manifest.columns().iter().map(|c| r.field(c)))?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: PathBuf::from("<csv writer>"),
        source,
    })?;
    Ok(())
}

pub const STAGING_CSV: &str = "staging.csv";
pub const REJECTS_TSV: &str = "rejects.tsv";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct StagingMeta {
    manifest: ColumnManifest,
    provenance: Provenance,
    records: usize,
    rejects: usize,
}

/// Writes a staging directory: `staging.csv`, `rejects.tsv` and
/// `manifest.json` (manifest plus source provenance).
pub fn save_staging(set: &StagingSet, dir: &Path) -> Result<(), IngestError> {
    let io = |path: PathBuf| move |source| IngestError::Io { path, source };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    let csv_path = dir.join(STAGING_CSV);
    let file = fs::File::create(&csv_path).map_err(io(csv_path.clone()))?;
    write_csv(set, std::io::BufWriter::new(file))?;

    let mut rejects = String::from("line\treason\n");
    for r in &set.rejects {
        rejects.push_str(&format!("{}\t{}\n", r.line, r.reason.replace(['\t', '\n'], " ")));
    }
    let rej_path = dir.join(REJECTS_TSV);
    fs::write(&rej_path, rejects).map_err(io(rej_path))?;

    let meta = StagingMeta {
        manifest: set.manifest.clone(),
        provenance: set.provenance.clone(),
        records: set.records.len(),
        rejects: set.rejects.len(),
    };
    let meta_path = dir.join(MANIFEST_JSON);
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(io(meta_path))?;
    Ok(())
}

/// Reads a directory written by [`save_staging`]. Provenance and rejects
/// refer to the original source file.
pub fn load_staging(dir: &Path) -> Result<StagingSet, IngestError> {
    let meta_path = dir.join(MANIFEST_JSON);
    let meta_text = fs::read_to_string(&meta_path).map_err(|source| IngestError::Io {
        path: meta_path,
        source,
    })?;
    let meta: StagingMeta = serde_json::from_str(&meta_text)?;
    let mut set = parse_csv(&dir.join(STAGING_CSV), &meta.manifest)?;
    set.provenance = meta.provenance;
    let rej_path = dir.join(REJECTS_TSV);
    if let Ok(text) = fs::read_to_string(&rej_path) {
        set.rejects = text
            .lines()
            .skip(1)
            .filter_map(|l| {
                let (line, reason) = l.split_once('\t')?;
                Some(Reject {
                    line: line.parse().ok()?,
                    reason: reason.to_string(),
                })
            })
            .collect();
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        ColumnManifest::default().columns().join(",")
    }

    fn row(overrides: &[(&str, &str)]) -> String {
        let m = ColumnManifest::default();
        let mut vals: BTreeMap<&str, &str> = [
            ("event_id", "E1"),
            ("event_type", "acc"),
            ("event_date", "2003-07-14"),
            ("event_year", "2003"),
            ("city", " Los Angeles "),
            ("state", "ca"),
            ("airport_icao", "klax"),
            ("acft_make", "Boeing"),
            ("acft_model", "737-800"),
            ("registration", "n123ab"),
            ("injury_level", "NONE"),
            ("probable_cause", "Engine \"fire\", then landing."),
        ]
        .into_iter()
        .collect();
        for (k, v) in overrides {
            vals.insert(k, v);
        }
        let fields: Vec<String> = m
            .columns()
            .iter()
            .map(|c| {
                let v = vals.get(c.as_str()).copied().unwrap_or("");
                format!("\"{}\"", v.replace('"', "\"\""))
            })
            .collect();
        fields.join(",")
    }

    fn parse(lines: &[String]) -> Result<StagingSet, IngestError> {
        let text = std::iter::once(header()).chain(lines.iter().cloned()).collect::<Vec<_>>().join("\n");
        parse_bytes(text.as_bytes(), "mem", &ColumnManifest::default())
    }

    #[test]
    fn year_backfilled_from_date() {
        let s = parse(&[row(&[("event_year", "")])]).unwrap();
        assert_eq!(s.records[0].event_year, 2003);
    }

    #[test]
    fn injury_and_codes_normalized() {
        let s = parse(&[row(&[("injury_level", "fatal")])]).unwrap();
        let r = &s.records[0];
        assert_eq!(r.injury_level, Some(InjuryLevel::Fatal));
        assert_eq!(r.airport_icao, "KLAX");
        assert_eq!(r.registration, "N123AB");
        assert_eq!(r.city, "Los Angeles");
        assert_eq!(r.probable_cause, "Engine \"fire\", then landing.");
    }

    #[test]
    fn each_rule_rejects_with_its_line() {
        let rows = vec![
            row(&[]),
            row(&[("event_id", "E2"), ("event_date", "14.07.2003")]),
            row(&[("event_id", "E3"), ("event_year", "2004")]),
            row(&[("event_id", "E4"), ("injury_level", "CRITICAL")]),
            row(&[("event_id", "E5"), ("airport_icao", "KLAXX")]),
            row(&[]),
            row(&[("event_id", "E7")]),
            "E8,too,few".to_string(),
            row(&[("event_id", "E9")]),
            row(&[("event_id", "E10")]),
            row(&[("event_id", "E11")]),
            row(&[("event_id", "E12")]),
            row(&[("event_id", "E13")]),
        ];
        let s = parse(&rows).unwrap();
        assert_eq!(s.records.len(), 7);
        let lines: Vec<u64> = s.rejects.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 4, 5, 6, 7, 9]);
        assert!(s.rejects[4].reason.contains("duplicate event_id E1"));
    }

    #[test]
    fn mostly_bad_file_is_a_hard_failure() {
        let rows = vec![row(&[]), "x".to_string(), "y".to_string()];
        assert!(matches!(
            parse(&rows),
            Err(IngestError::TooManyRejects { rejected: 2, total: 3 })
        ));
    }

    #[test]
    fn header_mismatch_lists_both_sides() {
        let text = header().replace("acft_make", "maker");
        let err = parse_bytes(text.as_bytes(), "mem", &ColumnManifest::default()).unwrap_err();
        match err {
            IngestError::HeaderMismatch { absent, extra } => {
                assert_eq!(absent, vec!["acft_make"]);
                assert_eq!(extra, vec!["maker"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_match_ignores_case_and_padding() {
        let text = format!("{}\n{}", header().to_uppercase().replace(',', " , "), row(&[]));
        let s = parse_bytes(text.as_bytes(), "mem", &ColumnManifest::default()).unwrap();
        assert_eq!(s.records.len(), 1);
    }

    #[test]
    fn serialize_then_parse_is_identity() {
        let s = parse(&[row(&[]), row(&[("event_id", "E2"), ("event_date", "01/02/1999"), ("event_year", "")])]).unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        let again = parse_bytes(&buf, "mem", &ColumnManifest::default()).unwrap();
        assert_eq!(again.records, s.records);
        assert_eq!(again.manifest, s.manifest);
    }
}
