#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;

use askg_core::build::build_graph;
use askg_core::graphstore::{snapshot_save, ImportBatch};
use askg_core::ingest::{gen_fixture, parse_csv, ColumnManifest, FixtureCounts, FixtureSpec};
use askg_core::resolve::{resolve_staging, Resolver, DEFAULT_THRESHOLD};
use askg_service::engine::Engine;

/// Fixture CSV through ingest, resolve (applied) and build to a snapshot.
pub fn snapshot(dir: &Path, records: usize, seed: u64) -> (PathBuf, FixtureCounts) {
    let csv = dir.join("fixture.csv");
    let counts = gen_fixture(&csv, &FixtureSpec::new(records, seed, 0.2)).unwrap();
    let set = parse_csv(&csv, &ColumnManifest::default()).unwrap();
    let resolver = Resolver::default();
    let resolution = resolve_staging(&set, &resolver, DEFAULT_THRESHOLD, true).unwrap();
    let (graph, _) = build_graph(&set, Some(&resolution.entities), &resolver, ImportBatch::DEFAULT_BATCH_SIZE).unwrap();
    let path = dir.join("graph.askg");
    snapshot_save(&graph, &path).unwrap();
    (path, counts)
}

pub struct Server {
    pub base: String,
    pub engine: Arc<Engine>,
    stop: Option<mpsc::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl Server {
    pub fn start(engine: Engine) -> Server {
        let engine = Arc::new(engine);
        let (addr_tx, addr_rx) = mpsc::channel();
        let (stop_tx, stop_rx) = mpsc::channel::<()>();
        let e = engine.clone();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(askg_service::http::serve(
                e,
                "127.0.0.1:0",
                move |a| addr_tx.send(a).unwrap(),
                async move {
                    let _ = tokio::task::spawn_blocking(move || stop_rx.recv()).await;
                },
            ))
            .unwrap();
        });
        let addr = addr_rx.recv().unwrap();
        Server {
            base: format!("http://{addr}"),
            engine,
            stop: Some(stop_tx),
            thread: Some(thread),
        }
    }

    fn agent() -> ureq::Agent {
        ureq::Agent::config_builder().http_status_as_error(false).build().into()
    }

    pub fn post(&self, path: &str, body: &str) -> (u16, serde_json::Value) {
        let mut r = Self::agent()
            .post(&format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(body)
            .unwrap();
        let status = r.status().as_u16();
        let text = r.body_mut().read_to_string().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(serde_json::Value::String(text)))
    }

    pub fn post_json(&self, path: &str, body: serde_json::Value) -> (u16, serde_json::Value) {
        self.post(path, &body.to_string())
    }

    pub fn get(&self, path: &str) -> (u16, serde_json::Value) {
        let mut r = Self::agent().get(&format!("{}{path}", self.base)).call().unwrap();
        let status = r.status().as_u16();
        let text = r.body_mut().read_to_string().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(serde_json::Value::String(text)))
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
