//! The question-answering pipeline shared by the HTTP API and the CLI.
//!
//! A question runs cache lookup, translation, plan lookup, execution,
//! grounded composition, verification and context update, then is logged
//! whether or not it succeeded.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use askg_core::cache::{CacheMetrics, CacheTier, QueryCache};
use askg_core::cypher::{
    execute, parse_with, plan, Cell, CypherError, PageInfo, PageRequest, ParseOptions, Params, QueryPlan, ResultSet,
};
use askg_core::graphstore::{snapshot_load, GraphSchema, GraphStats, NodeId, PropertyGraph, SharedGraph, Value};
use askg_core::ground::{compose, verify, GroundedAnswer, Violation};
use askg_core::translate::{
    update_context, ConversationContext, Diagnostic, FallbackTranslator, Lexicon, ProviderChain, ProviderDescriptor,
    ProviderKind, PromptTemplate, RemoteProvider, TranslateError, TranslationResult, TranslationSource, Translator,
};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use crate::config::Config;
use crate::log::{QueryLog, QueryLogEntry, RECENT};

/// Sessions held in memory; the least recently used is dropped past this.
pub const MAX_SESSIONS: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("no graph is loaded")]
    NotLoaded,
    #[error("{0}")]
    BadRequest(String),
    #[error("page_size {requested} exceeds the maximum of {max}")]
    PageSizeTooLarge { requested: usize, max: usize },
    #[error("cannot translate {question:?}")]
    Untranslatable { question: String, diagnostics: Vec<Diagnostic> },
    #[error(transparent)]
    Cypher(CypherError),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("{0}")]
    Internal(String),
}

impl EngineError {
    fn outcome(&self) -> &'static str {
        match self {
            EngineError::NotLoaded => "not_loaded",
            EngineError::BadRequest(_) | EngineError::PageSizeTooLarge { .. } | EngineError::Cypher(_) => "bad_request",
            EngineError::Untranslatable { .. } => "untranslatable",
            EngineError::Snapshot(_) | EngineError::Internal(_) => "internal",
        }
    }
}

/// What the result tier caches: everything needed to answer again without
/// translating or executing.
#[derive(Debug, Clone)]
pub struct CachedAnswer {
    pub translation: TranslationResult,
    pub results: ResultSet,
    pub answer: GroundedAnswer,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CacheInfo {
    /// `exact`, `semantic`, `plan` or `miss`.
    pub tier: String,
    /// Cosine similarity of a semantic hit.
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TranslationInfo {
    pub source: TranslationSource,
    pub provider: ProviderKind,
    pub attempts: u32,
    pub validation: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnswerBody {
    pub text: String,
    pub provenance: Vec<NodeId>,
    pub citations: Vec<askg_core::ground::Citation>,
    pub verified: bool,
    /// Present only when verification failed.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryResponse {
    pub session_id: String,
    pub question: String,
    pub cypher: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Vec<Vec<NodeId>>,
    pub page: PageInfo,
    pub answer: AnswerBody,
    pub translation: TranslationInfo,
    pub cache: CacheInfo,
    pub warnings: Vec<String>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CypherResponse {
    #[serde(flatten)]
    pub results: ResultSet,
    /// Whether the plan came from the plan cache.
    pub plan_cached: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsResponse {
    pub graph: GraphStats,
    pub cache: CacheMetrics,
    pub queries: usize,
    pub recent: Vec<QueryLogEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemaResponse {
    pub schema: GraphSchema,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct HealthResponse {
    pub status: &'static str,
    pub graph_loaded: bool,
    /// The rule-based stub answers locally, so some provider is always reachable.
    pub provider_reachable: bool,
    pub providers: Vec<ProviderDescriptor>,
}

struct Session {
    last_used: u64,
    context: Arc<Mutex<ConversationContext>>,
}

pub struct Engine {
    config: Config,
    graph: SharedGraph,
    loaded: AtomicBool,
    cache: Arc<QueryCache<CachedAnswer>>,
    translator: RwLock<Translator>,
    sessions: Mutex<HashMap<String, Session>>,
    tick: AtomicU64,
    log: QueryLog,
    clock: Instant,
}

/// Builds HTTP remotes from the configuration, in order.
pub fn remotes_from_config(config: &Config) -> Vec<RemoteProvider> {
    config
        .providers
        .iter()
        .filter(|p| p.kind != ProviderKind::DeterministicStub)
        .map(|p| {
            let key = p.api_key_env.as_deref().and_then(|v| std::env::var(v).ok());
            RemoteProvider::http(p.descriptor(), key, p.retries)
        })
        .collect()
}

fn tier_label(tier: CacheTier) -> &'static str {
    match tier {
        CacheTier::Exact => "exact",
        CacheTier::Plan => "plan",
        CacheTier::Semantic => "semantic",
    }
}

/// Result-tier key. Prior turns change what a follow-up means, so their
/// queries are part of the key; the page is too.
pub fn cache_key(question: &str, context: &ConversationContext, page: PageRequest) -> String {
    let mut key = question.trim().to_string();
    if !context.is_empty() {
        key.push_str(" | after ");
        let prior: Vec<&str> = context.turns.iter().map(|t| t.query.as_str()).collect();
        key.push_str(&prior.join(" ; "));
    }
    if page != PageRequest::default() {
        key.push_str(&format!(" | page {} of {}", page.number, page.size));
    }
    key
}

/// JSON parameters to graph values. Dates are written `{"date": "YYYY-MM-DD"}`
/// so that plain strings stay strings.
pub fn param_value(name: &str, v: &serde_json::Value) -> Result<Value, EngineError> {
    let bad = |why: &str| EngineError::BadRequest(format!("parameter {name}: {why}"));
    match v {
        serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Ok(Value::Int(i)),
            None => n.as_f64().map(Value::Float).ok_or_else(|| bad("number out of range")),
        },
        serde_json::Value::String(s) => Ok(Value::Str(s.clone())),
        serde_json::Value::Object(m) if m.len() == 1 && m.contains_key("date") => {
            let s = m["date"].as_str().ok_or_else(|| bad("date must be a string"))?;
            askg_core::ingest::parse_date(s).map(Value::Date).ok_or_else(|| bad("date must be YYYY-MM-DD"))
        }
        _ => Err(bad("expected a boolean, number, string or {\"date\": ...}")),
    }
}

impl Engine {
    pub fn new(config: Config) -> Result<Engine, EngineError> {
        let remotes = remotes_from_config(&config);
        Engine::with_remotes(config, remotes)
    }

    /// Remotes are tried in order before the stub.
    pub fn with_remotes(config: Config, remotes: Vec<RemoteProvider>) -> Result<Engine, EngineError> {
        config.validate().map_err(|e| EngineError::BadRequest(e.to_string()))?;
        let cache = Arc::new(QueryCache::new(config.cache_config()).map_err(|e| EngineError::Internal(e.to_string()))?);
        let graph = SharedGraph::default();
        graph.subscribe(cache.clone());
        let log = match &config.log_path {
            Some(p) => QueryLog::with_file(p).map_err(|e| EngineError::Internal(format!("{}: {e}", p.display())))?,
            None => QueryLog::in_memory(),
        };
        let chain = ProviderChain::new(remotes, FallbackTranslator::new(Lexicon::default()));
        Ok(Engine {
            config,
            graph,
            loaded: AtomicBool::new(false),
            cache,
            translator: RwLock::new(Translator::new(PromptTemplate::default(), chain)),
            sessions: Mutex::new(HashMap::new()),
            tick: AtomicU64::new(0),
            log,
            clock: Instant::now(),
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn log(&self) -> &QueryLog {
        &self.log
    }

    pub fn is_loaded(&self) -> bool {
        self.loaded.load(Ordering::SeqCst)
    }

    pub fn load_snapshot(&self, path: &Path) -> Result<(), EngineError> {
        let g = snapshot_load(path).map_err(|e| EngineError::Snapshot(format!("{}: {e}", path.display())))?;
        self.install(g);
        Ok(())
    }

    /// Swaps in `graph`, flushes both cache tiers and teaches the stub the
    /// graph's names.
    pub fn install(&self, graph: PropertyGraph) {
        let mut lexicon = Lexicon::default();
        lexicon.extend_from_graph(&graph);
        self.translator.write().unwrap_or_else(|e| e.into_inner()).chain.stub = FallbackTranslator::new(lexicon);
        self.graph.replace(graph);
        self.loaded.store(true, Ordering::SeqCst);
    }

    fn now(&self) -> Duration {
        self.clock.elapsed()
    }

    fn page(&self, number: Option<usize>, size: Option<usize>) -> Result<PageRequest, EngineError> {
        let size = size.unwrap_or(self.config.page_size);
        if size == 0 {
            return Err(EngineError::BadRequest("page_size must be at least 1".into()));
        }
        if size > self.config.max_page_size {
            return Err(EngineError::PageSizeTooLarge {
                requested: size,
                max: self.config.max_page_size,
            });
        }
        Ok(PageRequest {
            number: number.unwrap_or(0),
            size,
        })
    }

    pub fn new_context(&self, session_id: &str) -> ConversationContext {
        ConversationContext::with_bound(session_id, self.config.context_turns)
    }

    fn new_session_id(&self) -> String {
        let n = self.tick.fetch_add(1, Ordering::SeqCst);
        let salt = Utc::now().timestamp_nanos_opt().unwrap_or_default() as u64;
        format!("s-{:x}-{n}", salt & 0xffff_ffff)
    }

    fn session(&self, id: &str) -> Arc<Mutex<ConversationContext>> {
        let tick = self.tick.fetch_add(1, Ordering::SeqCst);
        let mut sessions = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        if !sessions.contains_key(id) && sessions.len() >= MAX_SESSIONS {
            if let Some(oldest) = sessions.iter().min_by_key(|(_, s)| s.last_used).map(|(k, _)| k.clone()) {
                sessions.remove(&oldest);
            }
        }
        let s = sessions.entry(id.to_string()).or_insert_with(|| Session {
            last_used: tick,
            context: Arc::new(Mutex::new(self.new_context(id))),
        });
        s.last_used = tick;
        s.context.clone()
    }

    /// HTTP entry point. Requests in one session are serialized, so each
    /// sees the context left by the previous one.
    pub fn query(
        &self,
        question: &str,
        session_id: Option<&str>,
        page: Option<usize>,
        page_size: Option<usize>,
    ) -> Result<QueryResponse, EngineError> {
        let id = session_id.map(str::to_string).unwrap_or_else(|| self.new_session_id());
        let slot = self.session(&id);
        let mut context = slot.lock().unwrap_or_else(|e| e.into_inner());
        let (response, next) = self.answer(question, &context, page, page_size)?;
        *context = next;
        Ok(response)
    }

    /// Stateless pipeline: answers under `context` and returns the context
    /// for the next turn. Every call appends one log entry.
    pub fn answer(
        &self,
        question: &str,
        context: &ConversationContext,
        page: Option<usize>,
        page_size: Option<usize>,
    ) -> Result<(QueryResponse, ConversationContext), EngineError> {
        let started = Instant::now();
        let outcome = self.answer_inner(question, context, page, page_size, started);
        let elapsed_ms = started.elapsed().as_secs_f64() * 1000.0;
        let entry = match &outcome {
            Ok((r, _)) => QueryLogEntry {
                timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
                session_id: context.session_id.clone(),
                question: question.to_string(),
                query: Some(r.cypher.clone()),
                cache: r.cache.tier.clone(),
                rows: r.rows.len(),
                elapsed_ms,
                verified: r.answer.verified,
                outcome: "ok".into(),
                warnings: r.warnings.clone(),
            },
            Err(e) => QueryLogEntry {
                timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
                session_id: context.session_id.clone(),
                question: question.to_string(),
                query: None,
                cache: "skipped".into(),
                rows: 0,
                elapsed_ms,
                verified: false,
                outcome: e.outcome().into(),
                warnings: match e {
                    EngineError::Untranslatable { diagnostics, .. } => {
                        diagnostics.iter().map(|d| format!("{:?}: {}", d.provider, d.error)).collect()
                    }
                    other => vec![other.to_string()],
                },
            },
        };
        self.log.append(entry);
        outcome
    }

    fn answer_inner(
        &self,
        question: &str,
        context: &ConversationContext,
        page: Option<usize>,
        page_size: Option<usize>,
        started: Instant,
    ) -> Result<(QueryResponse, ConversationContext), EngineError> {
        if question.trim().is_empty() {
            return Err(EngineError::BadRequest("question must not be empty".into()));
        }
        let page = self.page(page, page_size)?;
        if !self.is_loaded() {
            return Err(EngineError::NotLoaded);
        }
        let key = cache_key(question, context, page);
        let now = self.now();
        let (cached, cache) = match self.cache.get(&key, now) {
            Some(hit) => {
                let similarity = (hit.tier == CacheTier::Semantic).then_some(hit.similarity);
                let info = CacheInfo {
                    tier: tier_label(hit.tier).into(),
                    similarity,
                };
                (hit.value, info)
            }
            None => {
                let (cached, plan_hit) = self.compute(question, context, page, now)?;
                self.cache.put(&key, cached.clone(), now);
                let tier = if plan_hit { "plan" } else { "miss" };
                (cached, CacheInfo { tier: tier.into(), similarity: None })
            }
        };
        let next = update_context(context, question, &cached.translation, &cached.results);
        let mut warnings = cached.translation.validation.clone();
        warnings.extend(cached.results.warnings.iter().cloned());
        warnings.dedup();
        let response = QueryResponse {
            session_id: context.session_id.clone(),
            question: question.to_string(),
            cypher: cached.translation.query.clone(),
            columns: cached.results.columns.clone(),
            rows: cached.results.rows.clone(),
            provenance: cached.results.provenance.clone(),
            page: cached.results.page,
            answer: AnswerBody {
                text: cached.answer.text.clone(),
                provenance: cached.answer.provenance.clone(),
                citations: cached.answer.citations.clone(),
                verified: cached.answer.verified,
                violations: cached.violations.clone(),
            },
            translation: TranslationInfo {
                source: cached.translation.source,
                provider: cached.translation.provider,
                attempts: cached.translation.attempts,
                validation: cached.translation.validation.clone(),
            },
            cache,
            warnings,
            elapsed_ms: started.elapsed().as_secs_f64() * 1000.0,
        };
        Ok((response, next))
    }

    fn translation_error(e: TranslateError) -> EngineError {
        match e {
            TranslateError::Untranslatable { question, diagnostics } => {
                EngineError::Untranslatable { question, diagnostics }
            }
            TranslateError::Corpus(m) => EngineError::Internal(m),
        }
    }

    /// Plan from the plan tier, or planned and stored. The flag says
    /// whether it was a hit.
    fn plan_for(&self, text: &str, q: &askg_core::cypher::Query, schema: &GraphSchema, now: Duration) -> (QueryPlan, bool) {
        match self.cache.get_plan(text, now) {
            Some(p) => (p, true),
            None => {
                let p = plan(q, schema);
                self.cache.put_plan(text, p.clone(), now);
                (p, false)
            }
        }
    }

    fn compute(
        &self,
        question: &str,
        context: &ConversationContext,
        page: PageRequest,
        now: Duration,
    ) -> Result<(CachedAnswer, bool), EngineError> {
        let graph = self.graph.read();
        let schema = graph.catalog();
        let translation = self
            .translator
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .translate(question, &schema, context)
            .map_err(Self::translation_error)?;
        let (plan, plan_hit) = self.plan_for(&translation.query, &translation.ast, &schema, now);
        let results = execute(&graph, &plan, &Params::new(), page).map_err(|e| match e {
            CypherError::PageSizeTooLarge { requested, max } => EngineError::PageSizeTooLarge { requested, max },
            other => EngineError::Internal(format!("executing {}: {other}", translation.query)),
        })?;
        let answer = compose(question, &translation.ast, &results);
        let violations = if answer.verified { Vec::new() } else { verify(&answer, &results).violations };
        Ok((
            CachedAnswer {
                translation,
                results,
                answer,
                violations,
            },
            plan_hit,
        ))
    }

    /// Logs a `/api/query` request whose body never parsed, so the log
    /// still counts every invocation.
    pub fn record_rejected(&self, reason: &str) {
        self.log.append(QueryLogEntry {
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            session_id: String::new(),
            question: String::new(),
            query: None,
            cache: "skipped".into(),
            rows: 0,
            elapsed_ms: 0.0,
            verified: false,
            outcome: "bad_request".into(),
            warnings: vec![reason.to_string()],
        });
    }

    /// Translation only, for `askg query --cypher-only`. Logged like any
    /// other question.
    pub fn translate_only(&self, question: &str, context: &ConversationContext) -> Result<TranslationResult, EngineError> {
        let started = Instant::now();
        let outcome = if !self.is_loaded() {
            Err(EngineError::NotLoaded)
        } else {
            let graph = self.graph.read();
            self.translator
                .read()
                .unwrap_or_else(|e| e.into_inner())
                .translate(question, &graph.catalog(), context)
                .map_err(Self::translation_error)
        };
        self.log.append(QueryLogEntry {
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            session_id: context.session_id.clone(),
            question: question.to_string(),
            query: outcome.as_ref().ok().map(|t| t.query.clone()),
            cache: "skipped".into(),
            rows: 0,
            elapsed_ms: started.elapsed().as_secs_f64() * 1000.0,
            verified: false,
            outcome: match &outcome {
                Ok(_) => "ok".into(),
                Err(e) => e.outcome().into(),
            },
            warnings: outcome.as_ref().map(|t| t.validation.clone()).unwrap_or_default(),
        });
        outcome
    }

    /// Runs user-written query text. Parse and semantic errors are the
    /// caller's, so they come back as [`EngineError::Cypher`].
    pub fn cypher(
        &self,
        text: &str,
        params: &serde_json::Map<String, serde_json::Value>,
        page: Option<usize>,
        page_size: Option<usize>,
    ) -> Result<CypherResponse, EngineError> {
        let page = self.page(page, page_size)?;
        if !self.is_loaded() {
            return Err(EngineError::NotLoaded);
        }
        let mut bound = Params::new();
        for (k, v) in params {
            bound.insert(k.clone(), param_value(k, v)?);
        }
        let q = parse_with(
            text,
            ParseOptions {
                hop_ceiling: self.config.hop_ceiling,
            },
        )
        .map_err(EngineError::Cypher)?;
        let graph = self.graph.read();
        let (plan, plan_cached) = self.plan_for(&q.to_string(), &q, &graph.catalog(), self.now());
        let results = execute(&graph, &plan, &bound, page).map_err(EngineError::Cypher)?;
        Ok(CypherResponse { results, plan_cached })
    }

    pub fn schema(&self) -> Result<SchemaResponse, EngineError> {
        if !self.is_loaded() {
            return Err(EngineError::NotLoaded);
        }
        let schema = self.graph.read().catalog();
        Ok(SchemaResponse {
            text: schema.render(),
            schema,
        })
    }

    pub fn stats(&self) -> StatsResponse {
        StatsResponse {
            graph: self.graph.read().stats(),
            cache: self.cache.metrics(),
            queries: self.log.len(),
            recent: self.log.recent(RECENT),
        }
    }

    pub fn health(&self) -> HealthResponse {
        HealthResponse {
            status: "ok",
            graph_loaded: self.is_loaded(),
            provider_reachable: true,
            providers: self.translator.read().unwrap_or_else(|e| e.into_inner()).chain.descriptors(),
        }
    }
}
