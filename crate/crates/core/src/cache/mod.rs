//! Three-tier, time-bounded query cache.
//!
//! Tier 1 keys results on the exact question string. Tier 3 matches a new
//! question against cached ones by trigram-embedding cosine. Both result
//! tiers share one LRU store, so an entry is one question and one value.
//! Tier 2 holds query plans keyed on normalized query text in a separate
//! LRU store; plans depend only on the schema, so graph writes leave them
//! alone and only a schema change flushes them.
//!
//! Time is always passed in. An entry inserted at `t` with ttl `d` is served
//! for `now <= t + d` and treated as absent afterwards.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Mutex, MutexGuard};
use std::time::Duration;

use serde::Serialize;

use crate::cypher::QueryPlan;
use crate::graphstore::GraphObserver;
use crate::resolve::{cosine, EmbeddingProvider, TrigramEmbedder};

pub const DEFAULT_TTL: Duration = Duration::from_secs(300);
pub const DEFAULT_CAPACITY: usize = 1024;
pub const DEFAULT_SEMANTIC_THRESHOLD: f64 = 0.95;

/// Filler words ignored when comparing the content of two questions.
const FILLER: &[&str] = &[
    "a", "all", "an", "any", "are", "can", "could", "did", "do", "does", "find", "for", "get", "give", "is",
    "list", "me", "of", "please", "show", "tell", "the", "there", "what", "which", "you",
];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CacheError {
    #[error("ttl must be positive")]
    ZeroTtl,
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("semantic threshold {0} is outside (0, 1]")]
    InvalidThreshold(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheConfig {
    pub ttl: Duration,
    pub capacity: usize,
    pub semantic_threshold: f64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            ttl: DEFAULT_TTL,
            capacity: DEFAULT_CAPACITY,
            semantic_threshold: DEFAULT_SEMANTIC_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheTier {
    Exact,
    Plan,
    Semantic,
}

impl CacheTier {
    pub fn number(self) -> u8 {
        match self {
            CacheTier::Exact => 1,
            CacheTier::Plan => 2,
            CacheTier::Semantic => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit<V> {
    pub tier: CacheTier,
    pub value: V,
    /// The cached question that matched; differs from the asked one on a
    /// semantic hit.
    pub question: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheMetrics {
    pub exact_hits: u64,
    pub plan_hits: u64,
    pub semantic_hits: u64,
    pub misses: u64,
    pub plan_misses: u64,
    pub evictions: u64,
    pub expirations: u64,
    pub invalidations: u64,
    pub plan_invalidations: u64,
    pub entries: usize,
    pub plans: usize,
}

/// Lower-cased with runs of whitespace collapsed. Embeddings are taken over
/// this form so case and spacing never move a question in embedding space.
pub fn normalize_question(q: &str) -> String {
    q.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Alphanumeric tokens of the normalized question minus filler words. A
/// semantic hit requires equal sets, so questions that differ only in an
/// entity, code or number never share an answer however close their
/// embeddings are.
pub fn content_tokens(q: &str) -> BTreeSet<String> {
    normalize_question(q)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !FILLER.contains(t))
        .map(str::to_string)
        .collect()
}

struct Entry<T> {
    value: T,
    inserted_at: Duration,
    ttl: Duration,
    tick: u64,
}

impl<T> Entry<T> {
    fn expired(&self, now: Duration) -> bool {
        now > self.inserted_at.saturating_add(self.ttl)
    }
}

/// String-keyed LRU. `order` maps last-use tick to key; ticks are unique.
struct Lru<T> {
    map: HashMap<String, Entry<T>>,
    order: BTreeMap<u64, String>,
    capacity: usize,
}

impl<T> Lru<T> {
    fn new(capacity: usize) -> Self {
        Lru {
            map: HashMap::new(),
            order: BTreeMap::new(),
            capacity,
        }
    }

    fn len(&self) -> usize {
        self.map.len()
    }

    fn touch(&mut self, key: &str, tick: u64) {
        if let Some(e) = self.map.get_mut(key) {
            self.order.remove(&e.tick);
            e.tick = tick;
            self.order.insert(tick, key.to_string());
        }
    }

    fn remove(&mut self, key: &str) -> Option<Entry<T>> {
        let e = self.map.remove(key)?;
        self.order.remove(&e.tick);
        Some(e)
    }

    /// Inserts or replaces; returns how many entries were evicted.
    fn insert(&mut self, key: String, entry: Entry<T>) -> u64 {
        self.remove(&key);
        let mut evicted = 0;
        while self.map.len() >= self.capacity {
            let Some((_, oldest)) = self.order.pop_first() else { break };
            self.map.remove(&oldest);
            evicted += 1;
        }
        self.order.insert(entry.tick, key.clone());
        self.map.insert(key, entry);
        evicted
    }

    /// Drops expired entries; returns how many.
    fn purge(&mut self, now: Duration) -> u64 {
        let dead: Vec<String> = self
            .map
            .iter()
            .filter(|(_, e)| e.expired(now))
            .map(|(k, _)| k.clone())
            .collect();
        for k in &dead {
            self.remove(k);
        }
        dead.len() as u64
    }

    fn clear(&mut self) {
        self.map.clear();
        self.order.clear();
    }
}

struct Stored<V> {
    value: V,
    embedding: Vec<f64>,
    content: BTreeSet<String>,
}

struct Inner<V> {
    results: Lru<Stored<V>>,
    plans: Lru<QueryPlan>,
    tick: u64,
    metrics: CacheMetrics,
}

impl<V> Inner<V> {
    fn next_tick(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }
}

/// Thread-safe cache. Every operation holds one mutex for its duration, so
/// an `invalidate_all` that has returned is visible to every later `get`.
pub struct QueryCache<V> {
    config: CacheConfig,
    embedder: Box<dyn EmbeddingProvider>,
    inner: Mutex<Inner<V>>,
}

impl<V: Clone> QueryCache<V> {
    pub fn new(config: CacheConfig) -> Result<Self, CacheError> {
        Self::with_embedder(config, Box::new(TrigramEmbedder::default()))
    }

    pub fn with_embedder(config: CacheConfig, embedder: Box<dyn EmbeddingProvider>) -> Result<Self, CacheError> {
        if config.ttl.is_zero() {
            return Err(CacheError::ZeroTtl);
        }
        if config.capacity == 0 {
            return Err(CacheError::ZeroCapacity);
        }
        let t = config.semantic_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(CacheError::InvalidThreshold(t.to_string()));
        }
        Ok(QueryCache {
            config,
            embedder,
            inner: Mutex::new(Inner {
                results: Lru::new(config.capacity),
                plans: Lru::new(config.capacity),
                tick: 0,
                metrics: CacheMetrics::default(),
            }),
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    fn lock(&self) -> MutexGuard<'_, Inner<V>> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn embed(&self, question: &str) -> Option<Vec<f64>> {
        let n = normalize_question(question);
        if n.is_empty() {
            return None;
        }
        self.embedder.embed(&n).ok()
    }

    /// Tier 1, then tier 3. Expired entries are purged first.
    pub fn get(&self, question: &str, now: Duration) -> Option<Hit<V>> {
        let mut g = self.lock();
        let expired = g.results.purge(now);
        g.metrics.expirations += expired;
        let tick = g.next_tick();

        if let Some(e) = g.results.map.get(question) {
            let value = e.value.value.clone();
            g.results.touch(question, tick);
            g.metrics.exact_hits += 1;
            return Some(Hit {
                tier: CacheTier::Exact,
                value,
                question: question.to_string(),
                similarity: 1.0,
            });
        }

        // Scanned under the lock so an invalidation cannot interleave.
        let best = self.embed(question).and_then(|q| {
            let content = content_tokens(question);
            g.results
                .map
                .iter()
                .filter(|(_, e)| e.value.content == content)
                .map(|(k, e)| (cosine(&q, &e.value.embedding), k))
                .filter(|(s, _)| *s >= self.config.semantic_threshold)
                .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(a.1)))
                .map(|(s, k)| (s, k.clone()))
        });
        match best {
            Some((similarity, key)) => {
                let value = g.results.map[&key].value.value.clone();
                g.results.touch(&key, tick);
                g.metrics.semantic_hits += 1;
                Some(Hit {
                    tier: CacheTier::Semantic,
                    value,
                    question: key,
                    similarity,
                })
            }
            None => {
                g.metrics.misses += 1;
                None
            }
        }
    }

    /// Stores `value` under `question` in both result tiers with the
    /// configured ttl.
    pub fn put(&self, question: &str, value: V, now: Duration) {
        self.put_with_ttl(question, value, now, self.config.ttl)
            .expect("configured ttl is positive");
    }

    pub fn put_with_ttl(&self, question: &str, value: V, now: Duration, ttl: Duration) -> Result<(), CacheError> {
        if ttl.is_zero() {
            return Err(CacheError::ZeroTtl);
        }
        let stored = Stored {
            value,
            embedding: self.embed(question).unwrap_or_default(),
            content: content_tokens(question),
        };
        let mut g = self.lock();
        let tick = g.next_tick();
        let evicted = g.results.insert(
            question.to_string(),
            Entry {
                value: stored,
                inserted_at: now,
                ttl,
                tick,
            },
        );
        g.metrics.evictions += evicted;
        Ok(())
    }

    /// Tier 2 lookup keyed on normalized query text.
    pub fn get_plan(&self, query_text: &str, now: Duration) -> Option<QueryPlan> {
        let mut g = self.lock();
        let expired = g.plans.purge(now);
        g.metrics.expirations += expired;
        let tick = g.next_tick();
        match g.plans.map.get(query_text).map(|e| e.value.clone()) {
            Some(p) => {
                g.plans.touch(query_text, tick);
                g.metrics.plan_hits += 1;
                Some(p)
            }
            None => {
                g.metrics.plan_misses += 1;
                None
            }
        }
    }

    pub fn put_plan(&self, query_text: &str, plan: QueryPlan, now: Duration) {
        let mut g = self.lock();
        let tick = g.next_tick();
        let evicted = g.plans.insert(
            query_text.to_string(),
            Entry {
                value: plan,
                inserted_at: now,
                ttl: self.config.ttl,
                tick,
            },
        );
        g.metrics.evictions += evicted;
    }

    /// Flushes both result tiers. Plans survive.
    pub fn invalidate_all(&self) {
        let mut g = self.lock();
        g.results.clear();
        g.metrics.invalidations += 1;
    }

    /// Flushes plans as well as results.
    pub fn invalidate_schema(&self) {
        let mut g = self.lock();
        g.results.clear();
        g.plans.clear();
        g.metrics.invalidations += 1;
        g.metrics.plan_invalidations += 1;
    }

    pub fn len(&self) -> usize {
        self.lock().results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plan_count(&self) -> usize {
        self.lock().plans.len()
    }

    pub fn metrics(&self) -> CacheMetrics {
        let g = self.lock();
        CacheMetrics {
            entries: g.results.len(),
            plans: g.plans.len(),
            ..g.metrics
        }
    }
}

impl<V: Clone + Send> GraphObserver for QueryCache<V> {
    fn on_write(&self) {
        self.invalidate_all();
    }

    fn on_schema_change(&self) {
        self.invalidate_schema();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secs(s: u64) -> Duration {
        Duration::from_secs(s)
    }

    fn cache(capacity: usize) -> QueryCache<u32> {
        QueryCache::new(CacheConfig {
            capacity,
            ..CacheConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn config_is_validated() {
        let bad = |c: CacheConfig| QueryCache::<u32>::new(c).err();
        let d = CacheConfig::default();
        assert_eq!(bad(CacheConfig { ttl: Duration::ZERO, ..d }), Some(CacheError::ZeroTtl));
        assert_eq!(bad(CacheConfig { capacity: 0, ..d }), Some(CacheError::ZeroCapacity));
        assert!(bad(CacheConfig { semantic_threshold: 0.0, ..d }).is_some());
        assert!(bad(CacheConfig { semantic_threshold: f64::NAN, ..d }).is_some());
    }

    #[test]
    fn exact_hit_then_expiry() {
        let c = cache(4);
        c.put("q", 7, secs(10));
        assert_eq!(c.get("q", secs(10)).unwrap().tier, CacheTier::Exact);
        assert_eq!(c.get("q", secs(310)).unwrap().value, 7);
        assert!(c.get("q", secs(311)).is_none());
        assert!(c.is_empty());
        assert_eq!(c.metrics().expirations, 1);
    }

    #[test]
    fn zero_ttl_is_rejected() {
        let c = cache(4);
        assert_eq!(c.put_with_ttl("q", 1, secs(0), Duration::ZERO), Err(CacheError::ZeroTtl));
        assert!(c.is_empty());
    }

    #[test]
    fn touching_protects_from_eviction() {
        let c = cache(2);
        c.put("a", 1, secs(0));
        c.put("b", 2, secs(0));
        c.get("a", secs(1)).unwrap();
        c.put("c", 3, secs(1));
        assert!(c.get("b", secs(1)).is_none());
        assert!(c.get("a", secs(1)).is_some());
        assert_eq!(c.metrics().evictions, 1);
    }

    #[test]
    fn content_tokens_ignore_filler_and_case() {
        assert_eq!(content_tokens("Find Boeing 737 accidents"), content_tokens("show me boeing 737 ACCIDENTS"));
        assert_ne!(content_tokens("accidents in 2003"), content_tokens("accidents in 2004"));
        assert_eq!(normalize_question("  Find   Boeing\t737 "), "find boeing 737");
    }

    #[test]
    fn semantic_tier_needs_equal_content() {
        let c = cache(8);
        c.put("show accidents involving boeing aircraft in 2003", 1, secs(0));
        assert!(c.get("show accidents involving boeing aircraft in 2004", secs(0)).is_none());
        let hit = c.get("Show accidents involving Boeing aircraft in 2003", secs(0)).unwrap();
        assert_eq!(hit.tier, CacheTier::Semantic);
        assert_eq!(hit.value, 1);
    }

    #[test]
    fn plans_survive_writes_but_not_schema_changes() {
        let c = cache(4);
        let q = crate::cypher::parse("MATCH (n:Accident) RETURN n").unwrap();
        let p = crate::cypher::plan(&q, &crate::graphstore::GraphSchema::aviation());
        c.put_plan("k", p.clone(), secs(0));
        c.put("q", 1, secs(0));
        c.on_write();
        assert!(c.get("q", secs(0)).is_none());
        assert_eq!(c.get_plan("k", secs(0)), Some(p));
        c.on_schema_change();
        assert!(c.get_plan("k", secs(0)).is_none());
        let m = c.metrics();
        assert_eq!((m.plan_hits, m.plan_misses, m.invalidations), (1, 1, 2));
    }
}
