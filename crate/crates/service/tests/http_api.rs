mod common;

use std::time::Duration;

use askg_core::translate::{ChatBackend, ChatMessage, ProviderDescriptor, ProviderKind, RemoteProvider};
use askg_service::config::Config;
use askg_service::engine::Engine;
use common::{snapshot, Server};
use serde_json::json;

fn loaded(config: Config, remotes: Vec<RemoteProvider>) -> (tempfile::TempDir, Server) {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = snapshot(dir.path(), 200, 11);
    let engine = Engine::with_remotes(config, remotes).unwrap();
    engine.load_snapshot(&path).unwrap();
    (dir, Server::start(engine))
}

fn remote(backend: impl ChatBackend + 'static) -> RemoteProvider {
    RemoteProvider {
        descriptor: ProviderDescriptor {
            kind: ProviderKind::RemotePrimary,
            endpoint: "test://".into(),
            model: "test".into(),
            timeout: Duration::from_secs(1),
        },
        backend: Box::new(backend),
    }
}

#[test]
fn unloaded_server_reports_503_and_health() {
    let server = Server::start(Engine::new(Config::default()).unwrap());
    let (s, h) = server.get("/api/health");
    assert_eq!(s, 200);
    assert_eq!(h["graph_loaded"], false);
    assert_eq!(h["provider_reachable"], true);
    assert_eq!(h["providers"][0]["kind"], "deterministic_stub");
    let (s, _) = server.post_json("/api/query", json!({"question": "Find accidents"}));
    assert_eq!(s, 503);
    assert_eq!(server.get("/api/schema").0, 503);
}

#[test]
fn query_response_shape_and_cache_tiers() {
    let (_d, server) = loaded(Config::default(), Vec::new());
    let (s, a) = server.post_json("/api/query", json!({"question": "Find Boeing accidents", "session_id": "one"}));
    assert_eq!(s, 200, "{a}");
    for key in ["session_id", "cypher", "columns", "rows", "provenance", "page", "answer", "translation", "cache"] {
        assert!(a.get(key).is_some(), "missing {key} in {a}");
    }
    assert_eq!(a["session_id"], "one");
    assert_eq!(a["cache"]["tier"], "miss");
    assert_eq!(a["answer"]["verified"], true);
    assert_eq!(a["translation"]["source"], "fallback");
    assert!(a["answer"].get("violations").is_none());
    assert!(a["cypher"].as_str().unwrap().contains("'Boeing'"));
    assert_eq!(a["rows"].as_array().unwrap().len(), a["provenance"].as_array().unwrap().len());

    let (_, b) = server.post_json("/api/query", json!({"question": "Find Boeing accidents", "session_id": "two"}));
    assert_eq!(b["cache"]["tier"], "exact");
    assert_eq!(b["rows"], a["rows"]);
    let (_, c) = server.post_json("/api/query", json!({"question": "find boeing  accidents", "session_id": "three"}));
    assert_eq!(c["cache"]["tier"], "semantic");
    assert_eq!(c["rows"], a["rows"]);
}

#[test]
fn follow_ups_share_a_session_and_no_session_gets_a_new_id() {
    let (_d, server) = loaded(Config::default(), Vec::new());
    let (_, first) = server.post_json("/api/query", json!({"question": "Find Boeing accidents"}));
    let id = first["session_id"].as_str().unwrap().to_string();
    let (s, f) = server.post_json("/api/query", json!({"question": "what about Airbus?", "session_id": id}));
    assert_eq!(s, 200, "{f}");
    assert!(f["cypher"].as_str().unwrap().contains("'Airbus'"), "{f}");
    let (_, other) = server.post_json("/api/query", json!({"question": "Find Boeing accidents"}));
    assert_ne!(other["session_id"], first["session_id"]);
}

#[test]
fn status_codes() {
    let (_d, server) = loaded(Config::default(), Vec::new());
    assert_eq!(server.post("/api/query", "{not json").0, 400);
    assert_eq!(server.post_json("/api/query", json!({"q": "x"})).0, 400);
    assert_eq!(server.post_json("/api/query", json!({"question": "  "})).0, 400);
    let (s, big) = server.post_json("/api/query", json!({"question": "Find accidents", "page_size": 5000}));
    assert_eq!(s, 413);
    assert_eq!(big["max"], 1000);
    let (s, u) = server.post_json("/api/query", json!({"question": "what is the weather like"}));
    assert_eq!(s, 422);
    assert_eq!(u["diagnostics"][0]["provider"], "deterministic_stub");
    assert_eq!(server.post_json("/api/cypher", json!({"query": "MATCH (x:Accident RETURN x"})).0, 400);
    assert_eq!(server.post_json("/api/cypher", json!({"query": "MATCH (x:Accident) WHERE x.event_id = $id RETURN x"})).0, 400);
}

#[test]
fn cypher_endpoint_binds_params_and_pages() {
    let (_d, server) = loaded(Config::default(), Vec::new());
    let (s, all) = server.post_json("/api/cypher", json!({"query": "MATCH (x:Accident) RETURN x.event_id ORDER BY x.event_id"}));
    assert_eq!(s, 200, "{all}");
    let first = all["rows"][0][0].as_str().unwrap().to_string();
    let (_, one) = server.post_json(
        "/api/cypher",
        json!({"query": "MATCH (x:Accident) WHERE x.event_id = $id RETURN x", "params": {"id": first}}),
    );
    assert_eq!(one["rows"].as_array().unwrap().len(), 1);
    assert_eq!(one["rows"][0][0]["kind"], "node");
    assert_eq!(one["rows"][0][0]["properties"]["event_id"], first.as_str());
    let (_, page) = server.post_json(
        "/api/cypher",
        json!({"query": "MATCH (x:Accident) RETURN x.event_id ORDER BY x.event_id", "page": 1, "page_size": 10}),
    );
    assert_eq!(page["rows"].as_array().unwrap()[..], all["rows"].as_array().unwrap()[10..20]);
    assert_eq!(page["page"]["has_more"], true);
    let (_, again) = server.post_json("/api/cypher", json!({"query": "MATCH (x:Accident) RETURN x.event_id ORDER BY x.event_id"}));
    assert_eq!(again["plan_cached"], true);
}

#[test]
fn schema_and_stats() {
    let (_d, server) = loaded(Config::default(), Vec::new());
    let (s, schema) = server.get("/api/schema");
    assert_eq!(s, 200);
    assert!(schema["text"].as_str().unwrap().contains("(:Aircraft)-[:MANUFACTURED_BY]->(:Manufacturer)"));
    let asked = ["Find accidents", "Find Boeing accidents", "what is the weather like", "Find accidents"];
    for q in asked {
        server.post_json("/api/query", json!({"question": q}));
    }
    server.post("/api/query", "{broken");
    let (_, stats) = server.get("/api/stats");
    // A body that never parses is still an invocation.
    assert_eq!(stats["queries"], asked.len() + 1);
    assert_eq!(stats["recent"].as_array().unwrap().len(), asked.len() + 1);
    assert_eq!(stats["recent"][4]["outcome"], "bad_request");
    assert_eq!(stats["recent"][2]["outcome"], "untranslatable");
    assert_eq!(stats["recent"][3]["cache"], "exact");
    assert!(stats["graph"]["labels"]["Accident"].as_u64().unwrap() > 0);
    assert!(stats["cache"]["exact_hits"].as_u64().unwrap() >= 1);
}

struct Slow;

impl ChatBackend for Slow {
    fn complete(&self, _: &[ChatMessage]) -> Result<String, String> {
        std::thread::sleep(Duration::from_millis(400));
        Ok("MATCH (x:Accident) RETURN x".into())
    }
}

struct Panics;

impl ChatBackend for Panics {
    fn complete(&self, _: &[ChatMessage]) -> Result<String, String> {
        panic!("secret internal detail");
    }
}

#[test]
fn slow_pipeline_times_out() {
    let config = Config {
        request_timeout_ms: 50,
        ..Config::default()
    };
    let (_d, server) = loaded(config, vec![remote(Slow)]);
    let (s, body) = server.post_json("/api/query", json!({"question": "Find accidents"}));
    assert_eq!(s, 504, "{body}");
    assert_eq!(server.get("/api/health").0, 200);
}

#[test]
fn internal_errors_hide_details() {
    let (_d, server) = loaded(Config::default(), vec![remote(Panics)]);
    let (s, body) = server.post_json("/api/query", json!({"question": "Find accidents"}));
    assert_eq!(s, 500);
    assert!(body["correlation_id"].as_str().unwrap().starts_with("req-"));
    assert!(!body.to_string().contains("secret"));
    // The server keeps answering after a worker panic.
    assert_eq!(server.get("/api/health").0, 200);
}
