use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

fn askg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_askg"))
        .current_dir(dir)
        .env_remove("ASKG_CONFIG")
        .args(args)
        .output()
        .unwrap()
}

fn ok_json(dir: &Path, args: &[&str]) -> serde_json::Value {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let out = askg(dir, &all);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{args:?}: {e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn pipeline(dir: &Path) {
    ok_json(dir, &["gen-fixture", "--records", "300", "--seed", "5", "--alias-rate", "0.2", "--out", "f.csv"]);
    ok_json(dir, &["ingest", "--input", "f.csv", "--out", "staging"]);
    ok_json(dir, &["resolve", "--staging", "staging", "--threshold", "0.8", "--apply", "--report", "r.csv"]);
    ok_json(dir, &["build", "--staging", "staging", "--snapshot", "g.askg"]);
}

fn report_pairs(path: &Path) -> BTreeSet<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect()
}

#[test]
fn pipeline_then_query_prints_a_verified_answer() {
    let d = tempfile::tempdir().unwrap();
    pipeline(d.path());
    assert!(d.path().join("staging/entities.json").exists());
    let out = askg(d.path(), &["query", "Find Boeing 737 accidents", "--snapshot", "g.askg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Cypher: MATCH"), "{text}");
    assert!(!text.contains("Unverified"));
    let j = ok_json(d.path(), &["query", "Find Boeing 737 accidents", "--snapshot", "g.askg"]);
    assert_eq!(j["answer"]["verified"], true);
    assert!(!j["cypher"].as_str().unwrap().is_empty());
}

#[test]
fn cypher_only_skips_execution() {
    let d = tempfile::tempdir().unwrap();
    pipeline(d.path());
    let j = ok_json(d.path(), &["query", "Find Boeing 737 accidents", "--cypher-only", "--snapshot", "g.askg"]);
    assert!(j["query"].as_str().unwrap().starts_with("MATCH"));
    assert!(j.get("rows").is_none() && j.get("answer").is_none());
}

#[test]
fn sessions_persist_between_invocations_and_every_query_is_logged() {
    let d = tempfile::tempdir().unwrap();
    pipeline(d.path());
    let set = ["--set", "log_path=q.jsonl", "--set", "session_dir=sessions", "--snapshot", "g.askg"];
    let mut first = vec!["query", "Find Boeing accidents", "--session", "s1"];
    first.extend_from_slice(&set);
    ok_json(d.path(), &first);
    let mut follow = vec!["query", "what about Airbus?", "--session", "s1"];
    follow.extend_from_slice(&set);
    let j = ok_json(d.path(), &follow);
    assert!(j["cypher"].as_str().unwrap().contains("'Airbus'"), "{j}");
    assert!(d.path().join("sessions/s1.json").exists());
    let mut bad = vec!["query", "what is the weather like"];
    bad.extend_from_slice(&set);
    assert!(!askg(d.path(), &bad).status.success());
    let log = std::fs::read_to_string(d.path().join("q.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(askg(d.path(), &["query", "x", "--session", "../evil", "--snapshot", "g.askg"]).status.code() != Some(0));
}

#[test]
fn stricter_threshold_reports_a_subset() {
    let d = tempfile::tempdir().unwrap();
    pipeline(d.path());
    ok_json(d.path(), &["resolve", "--staging", "staging", "--threshold", "0.99", "--report", "strict.csv"]);
    ok_json(d.path(), &["resolve", "--staging", "staging", "--threshold", "0.8", "--report", "loose.csv"]);
    let strict = report_pairs(&d.path().join("strict.csv"));
    let loose = report_pairs(&d.path().join("loose.csv"));
    assert!(strict.is_subset(&loose));
    assert!(!loose.is_empty());
}

#[test]
fn annotate_train_and_predict() {
    let d = tempfile::tempdir().unwrap();
    ok_json(d.path(), &["annotate", "train", "--out", "m.json"]);
    let j = ok_json(d.path(), &["annotate", "predict", "--model", "m.json", "engine fire"]);
    let c = j["confidence"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&c));
    assert!(j["label"].is_string());
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        &["ingest", "--input", "missing.csv", "--out", "s"][..],
        &["query", "Find accidents"][..],
        &["--set", "page_size=0", "gen-fixture", "--out", "f.csv"][..],
        &["build", "--staging", "nope", "--snapshot", "g"][..],
    ] {
        let out = askg(d.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("askg: "));
    }
    let out = askg(d.path(), &["--json", "query", "Find accidents"]);
    let j: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(j["error"].as_str().unwrap().contains("snapshot"));
}

#[test]
fn config_file_env_and_set_layer_in_order() {
    let d = tempfile::tempdir().unwrap();
    pipeline(d.path());
    std::fs::write(d.path().join("askg.toml"), "snapshot = \"missing.askg\"\npage_size = 2\n").unwrap();
    // File alone points at a missing snapshot.
    assert!(!askg(d.path(), &["--config", "askg.toml", "query", "Find accidents"]).status.success());
    // The environment beats the file.
    let out = Command::new(env!("CARGO_BIN_EXE_askg"))
        .current_dir(d.path())
        .env("ASKG_SNAPSHOT", "g.askg")
        .args(["--json", "--config", "askg.toml", "query", "Find accidents"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let j: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(j["rows"].as_array().unwrap().len(), 2);
    // --set beats both.
    let out = Command::new(env!("CARGO_BIN_EXE_askg"))
        .current_dir(d.path())
        .env("ASKG_PAGE_SIZE", "4")
        .args(["--json", "--config", "askg.toml", "--set", "page_size=3", "query", "Find accidents", "--snapshot", "g.askg"])
        .output()
        .unwrap();
    let j: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(j["rows"].as_array().unwrap().len(), 3);
}
