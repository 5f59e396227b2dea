use std::collections::HashSet;
use std::fs;

use askg_core::ingest::{
    counts_path, gen_fixture, load_staging, parse_bytes, parse_csv, parse_truth, render_fixture, save_staging,
    truth_path, write_csv, ColumnManifest, FixtureCounts, FixtureSpec, IngestError,
};
use proptest::prelude::*;

/// Counts rows of the generated CSV that a careful reader would reject,
/// using only the raw text and the documented row rules.
fn count_bad_rows(csv: &str) -> (usize, usize) {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(csv.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (id, date, year, injury, icao) = (
        col("event_id"),
        col("event_date"),
        col("event_year"),
        col("injury_level"),
        col("airport_icao"),
    );
    let mut seen = HashSet::new();
    let (mut rows, mut bad) = (0, 0);
    for rec in reader.records() {
        let rec = rec.unwrap();
        rows += 1;
        if rec.len() != header.len() {
            bad += 1;
            continue;
        }
        let d = rec[date].trim();
        let parsed = chrono::NaiveDate::parse_from_str(d, "%Y-%m-%d")
            .or_else(|_| chrono::NaiveDate::parse_from_str(d, "%m/%d/%Y"));
        let year_ok = match (&parsed, rec[year].trim()) {
            (Ok(_), "") => true,
            (Ok(p), y) => y.parse::<i32>().ok() == Some(chrono::Datelike::year(p)),
            _ => false,
        };
        let inj = rec[injury].trim().to_uppercase();
        let inj_ok = ["", "NONE", "MINOR", "SERIOUS", "FATAL"].contains(&inj.as_str());
        let ic = rec[icao].trim();
        let icao_ok = ic.is_empty() || (ic.len() == 4 && ic.chars().all(|c| c.is_ascii_alphanumeric()));
        if parsed.is_err() || !year_ok || !inj_ok || !icao_ok || rec[id].trim().is_empty() {
            bad += 1;
            continue;
        }
        if !seen.insert(rec[id].trim().to_string()) {
            bad += 1;
        }
    }
    (rows, bad)
}

#[test]
fn thousand_row_fixture_stages_990_records() {
    let f = render_fixture(&FixtureSpec::new(1000, 7, 0.2)).unwrap();
    let (rows, bad) = count_bad_rows(&f.csv);
    assert_eq!((rows, bad), (1000, 10));
    let set = parse_bytes(f.csv.as_bytes(), "fixture.csv", &ColumnManifest::default()).unwrap();
    assert_eq!(set.records.len(), 990);
    assert_eq!(set.rejects.len(), 10);
    assert_eq!(set.records.len(), f.counts.records);
}

#[test]
fn generated_files_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec::new(100, 7, 0.2);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    gen_fixture(&a, &spec).unwrap();
    gen_fixture(&b, &spec).unwrap();
    for (x, y) in [(a.clone(), b.clone()), (truth_path(&a), truth_path(&b)), (counts_path(&a), counts_path(&b))] {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

#[test]
fn zero_alias_rate_writes_empty_truth() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    let counts = gen_fixture(&p, &FixtureSpec::new(500, 11, 0.0)).unwrap();
    assert!(parse_truth(&fs::read_to_string(truth_path(&p)).unwrap()).is_empty());
    assert_eq!(counts.alias_clusters, 0);
}

#[test]
fn truth_cluster_count_matches_recorded_count() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    gen_fixture(&p, &FixtureSpec::new(1000, 7, 0.2)).unwrap();
    let clusters = parse_truth(&fs::read_to_string(truth_path(&p)).unwrap());
    let counts: FixtureCounts = serde_json::from_str(&fs::read_to_string(counts_path(&p)).unwrap()).unwrap();
    assert!(!clusters.is_empty());
    assert_eq!(clusters.len(), counts.alias_clusters);
    // The three spellings of the composite model identifier can all appear.
    let model = clusters.iter().find(|c| c.kind == "model" && c.canonical == "737-800");
    if let Some(c) = model {
        assert!(c.surfaces.iter().all(|s| ["737-800", "B737-800", "Boeing 737-800"].contains(&s.as_str())));
    }
}

#[test]
fn unwritable_output_path_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let err = gen_fixture(&blocker.join("sub").join("f.csv"), &FixtureSpec::new(5, 1, 0.0)).unwrap_err();
    assert!(matches!(err, IngestError::Io { .. }));
}

#[test]
fn missing_input_file_is_an_error() {
    let err = parse_csv(std::path::Path::new("/nonexistent/x.csv"), &ColumnManifest::default()).unwrap_err();
    assert!(matches!(err, IngestError::Io { .. }));
}

#[test]
fn staging_directory_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    gen_fixture(&p, &FixtureSpec::new(300, 5, 0.3)).unwrap();
    let set = parse_csv(&p, &ColumnManifest::default()).unwrap();
    let staging = dir.path().join("staging");
    save_staging(&set, &staging).unwrap();
    assert_eq!(load_staging(&staging).unwrap(), set);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parse_serialize_parse_is_stable(n in 1usize..400, seed in any::<u64>(), rate in 0.0f64..=1.0) {
        let f = render_fixture(&FixtureSpec::new(n, seed, rate)).unwrap();
        let manifest = ColumnManifest::default();
        let first = parse_bytes(f.csv.as_bytes(), "f.csv", &manifest).unwrap();
        let mut buf = Vec::new();
        write_csv(&first, &mut buf).unwrap();
        let second = parse_bytes(&buf, "f.csv", &manifest).unwrap();
        prop_assert_eq!(&second.records, &first.records);
        prop_assert_eq!(&second.manifest, &first.manifest);
        prop_assert!(second.rejects.is_empty());

        let mut again = Vec::new();
        write_csv(&second, &mut again).unwrap();
        prop_assert_eq!(again, buf.clone());
        // Manifest order survives into the serialized header.
        let header = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        prop_assert_eq!(header, manifest.columns().join(","));
    }

    #[test]
    fn duplicate_event_ids_never_both_survive(n in 2usize..400, seed in any::<u64>()) {
        let f = render_fixture(&FixtureSpec::new(n, seed, 0.2)).unwrap();
        let set = parse_bytes(f.csv.as_bytes(), "f.csv", &ColumnManifest::default()).unwrap();
        let mut ids = HashSet::new();
        for r in &set.records {
            prop_assert!(ids.insert(r.event_id.clone()));
            prop_assert!(!r.event_id.is_empty());
            prop_assert!(r.year_matches_date());
        }
        prop_assert_eq!(set.records.len(), f.counts.records);
    }
}
