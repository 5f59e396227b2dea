//! JSON HTTP API over [`Engine`].
//!
//! Bodies are parsed by hand so malformed JSON is a 400 with a message
//! rather than the extractor's default status. Pipeline work runs on the
//! blocking pool under the configured request timeout.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::engine::{Engine, EngineError};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub question: String,
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub page: Option<usize>,
    #[serde(default)]
    pub page_size: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CypherRequest {
    pub query: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub page: Option<usize>,
    #[serde(default)]
    pub page_size: Option<usize>,
}

#[derive(Clone)]
struct AppState {
    engine: Arc<Engine>,
    correlation: Arc<AtomicU64>,
}

pub fn router(engine: Arc<Engine>) -> Router {
    let state = AppState {
        engine,
        correlation: Arc::new(AtomicU64::new(1)),
    };
    Router::new()
        .route("/api/query", post(query))
        .route("/api/cypher", post(cypher))
        .route("/api/schema", get(schema))
        .route("/api/stats", get(stats))
        .route("/api/health", get(health))
        .with_state(state)
}

fn error(status: StatusCode, body: serde_json::Value) -> Response {
    (status, Json(body)).into_response()
}

impl AppState {
    /// Internal detail goes to stderr under a correlation id; the client
    /// sees only the id.
    fn internal(&self, detail: &str) -> Response {
        let id = format!("req-{}", self.correlation.fetch_add(1, Ordering::SeqCst));
        eprintln!("{id}: {detail}");
        error(
            StatusCode::INTERNAL_SERVER_ERROR,
            json!({"error": "internal error", "correlation_id": id}),
        )
    }

    fn engine_error(&self, e: EngineError) -> Response {
        match e {
            EngineError::NotLoaded => error(StatusCode::SERVICE_UNAVAILABLE, json!({"error": e.to_string()})),
            EngineError::BadRequest(_) | EngineError::Cypher(_) => {
                error(StatusCode::BAD_REQUEST, json!({"error": e.to_string()}))
            }
            EngineError::PageSizeTooLarge { requested, max } => error(
                StatusCode::PAYLOAD_TOO_LARGE,
                json!({"error": e.to_string(), "requested": requested, "max": max}),
            ),
            EngineError::Untranslatable { question, diagnostics } => error(
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": format!("cannot translate {question:?}"), "diagnostics": diagnostics}),
            ),
            EngineError::Snapshot(m) | EngineError::Internal(m) => self.internal(&m),
        }
    }

    /// Runs `f` on the blocking pool, bounded by the request timeout.
    async fn run<T, F>(&self, f: F) -> Response
    where
        T: serde::Serialize + Send + 'static,
        F: FnOnce(&Engine) -> Result<T, EngineError> + Send + 'static,
    {
        let engine = self.engine.clone();
        let timeout = engine.config().request_timeout();
        let task = tokio::task::spawn_blocking(move || f(&engine));
        match tokio::time::timeout(timeout, task).await {
            Err(_) => error(
                StatusCode::GATEWAY_TIMEOUT,
                json!({"error": format!("no answer within {} ms", timeout.as_millis())}),
            ),
            Ok(Err(join)) => self.internal(&format!("worker failed: {join}")),
            Ok(Ok(Err(e))) => self.engine_error(e),
            Ok(Ok(Ok(v))) => Json(v).into_response(),
        }
    }
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, String> {
    serde_json::from_slice(bytes).map_err(|e| format!("invalid request body: {e}"))
}

fn bad_body(message: String) -> Response {
    error(StatusCode::BAD_REQUEST, json!({"error": message}))
}

async fn query(State(s): State<AppState>, bytes: Bytes) -> Response {
    let req: QueryRequest = match body(&bytes) {
        Ok(r) => r,
        Err(m) => {
            s.engine.record_rejected(&m);
            return bad_body(m);
        }
    };
    s.run(move |e| e.query(&req.question, req.session_id.as_deref(), req.page, req.page_size))
        .await
}

async fn cypher(State(s): State<AppState>, bytes: Bytes) -> Response {
    let req: CypherRequest = match body(&bytes) {
        Ok(r) => r,
        Err(m) => return bad_body(m),
    };
    s.run(move |e| e.cypher(&req.query, &req.params, req.page, req.page_size)).await
}

async fn schema(State(s): State<AppState>) -> Response {
    s.run(|e| e.schema()).await
}

async fn stats(State(s): State<AppState>) -> Response {
    s.run(|e| Ok(e.stats())).await
}

async fn health(State(s): State<AppState>) -> Response {
    Json(s.engine.health()).into_response()
}

/// Serves until `shutdown` resolves. `ready` receives the bound address,
/// which matters when binding port 0.
pub async fn serve(
    engine: Arc<Engine>,
    bind: &str,
    ready: impl FnOnce(SocketAddr),
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    ready(listener.local_addr()?);
    axum::serve(listener, router(engine)).with_graceful_shutdown(shutdown).await
}
