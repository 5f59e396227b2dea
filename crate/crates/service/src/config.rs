//! Layered configuration: built-in defaults, then a TOML file, then
//! `ASKG_*` environment variables, then command-line `--set key=value`
//! overrides. Later layers win key by key.

use std::path::{Path, PathBuf};
use std::time::Duration;

use askg_core::cache::CacheConfig;
use askg_core::cypher::MAX_PAGE_SIZE;
use askg_core::translate::{ProviderDescriptor, ProviderKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("{key} = {value}: {reason}")]
    Invalid { key: String, value: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheSection {
    pub ttl_secs: u64,
    pub capacity: usize,
    pub semantic_threshold: f64,
}

impl Default for CacheSection {
    fn default() -> Self {
        let c = CacheConfig::default();
        CacheSection {
            ttl_secs: c.ttl.as_secs(),
            capacity: c.capacity,
            semantic_threshold: c.semantic_threshold,
        }
    }
}

/// One chat-completion endpoint. The rule-based stub always ends the chain;
/// listing it is optional and allowed only as the last entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub model: String,
    #[serde(default = "default_provider_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
}

fn default_provider_timeout_ms() -> u64 {
    8_000
}

fn default_retries() -> u32 {
    1
}

impl ProviderSection {
    pub fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor {
            kind: self.kind,
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            timeout: Duration::from_millis(self.timeout_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub snapshot: Option<PathBuf>,
    pub bind: String,
    pub request_timeout_ms: u64,
    /// Query log as JSON lines; in memory only when unset.
    pub log_path: Option<PathBuf>,
    /// Where `askg query --session` keeps conversation state.
    pub session_dir: PathBuf,
    pub resolution_threshold: f64,
    pub page_size: usize,
    pub max_page_size: usize,
    pub hop_ceiling: u32,
    pub context_turns: usize,
    pub cache: CacheSection,
    pub providers: Vec<ProviderSection>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            snapshot: None,
            bind: "127.0.0.1:7878".into(),
            request_timeout_ms: 10_000,
            log_path: None,
            session_dir: PathBuf::from(".askg/sessions"),
            resolution_threshold: askg_core::resolve::DEFAULT_THRESHOLD,
            page_size: askg_core::cypher::DEFAULT_PAGE_SIZE,
            max_page_size: MAX_PAGE_SIZE,
            hop_ceiling: askg_core::cypher::DEFAULT_HOP_CEILING,
            context_turns: askg_core::translate::DEFAULT_CONTEXT_TURNS,
            cache: CacheSection::default(),
            providers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Text,
    Int,
    Float,
}

/// Every scalar key, its environment variable and its type.
pub const KEYS: &[(&str, &str)] = &[
    ("snapshot", "ASKG_SNAPSHOT"),
    ("bind", "ASKG_BIND"),
    ("request_timeout_ms", "ASKG_REQUEST_TIMEOUT_MS"),
    ("log_path", "ASKG_LOG_PATH"),
    ("session_dir", "ASKG_SESSION_DIR"),
    ("resolution_threshold", "ASKG_RESOLUTION_THRESHOLD"),
    ("page_size", "ASKG_PAGE_SIZE"),
    ("max_page_size", "ASKG_MAX_PAGE_SIZE"),
    ("hop_ceiling", "ASKG_HOP_CEILING"),
    ("context_turns", "ASKG_CONTEXT_TURNS"),
    ("cache.ttl_secs", "ASKG_CACHE_TTL_SECS"),
    ("cache.capacity", "ASKG_CACHE_CAPACITY"),
    ("cache.semantic_threshold", "ASKG_CACHE_SEMANTIC_THRESHOLD"),
];

fn kind_of(key: &str) -> Kind {
    match key {
        "snapshot" | "bind" | "log_path" | "session_dir" => Kind::Text,
        "resolution_threshold" | "cache.semantic_threshold" => Kind::Float,
        _ => Kind::Int,
    }
}

fn set_key(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), ConfigError> {
    if !KEYS.iter().any(|(k, _)| *k == key) {
        return Err(ConfigError::UnknownKey(key.to_string()));
    }
    let invalid = |reason: &str| ConfigError::Invalid {
        key: key.to_string(),
        value: raw.to_string(),
        reason: reason.to_string(),
    };
    let value = match kind_of(key) {
        Kind::Text => toml::Value::String(raw.to_string()),
        Kind::Int => toml::Value::Integer(raw.trim().parse().map_err(|_| invalid("expected an integer"))?),
        Kind::Float => toml::Value::Float(raw.trim().parse().map_err(|_| invalid("expected a number"))?),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("keys are non-empty");
    let mut t = table;
    for p in parts {
        t = t
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| invalid("parent is not a table"))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl Config {
    /// Layers `file`, the `ASKG_*` variables found in `env` and the
    /// `key=value` overrides over the defaults, then validates.
    pub fn load(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[String],
    ) -> Result<Config, ConfigError> {
        let mut table = toml::Table::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let parsed: toml::Table = toml::from_str(&text).map_err(|e| ConfigError::Parse {
                origin: path.display().to_string(),
                message: e.to_string(),
            })?;
            merge(&mut table, parsed);
        }
        let env: Vec<(String, String)> = env.into_iter().collect();
        for (key, var) in KEYS {
            if let Some((_, v)) = env.iter().find(|(k, _)| k == var) {
                set_key(&mut table, key, v)?;
            }
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Invalid {
                key: o.clone(),
                value: String::new(),
                reason: "expected key=value".into(),
            })?;
            set_key(&mut table, k.trim(), v)?;
        }
        let config: Config = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
            origin: "configuration".into(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(ok: bool, key: &str, value: impl ToString, reason: &str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    key: key.into(),
                    value: value.to_string(),
                    reason: reason.into(),
                })
            }
        }
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        check(unit(self.resolution_threshold), "resolution_threshold", self.resolution_threshold, "must be in (0, 1]")?;
        check(unit(self.cache.semantic_threshold), "cache.semantic_threshold", self.cache.semantic_threshold, "must be in (0, 1]")?;
        check(self.cache.ttl_secs >= 1, "cache.ttl_secs", self.cache.ttl_secs, "must be at least 1")?;
        check(self.cache.capacity >= 1, "cache.capacity", self.cache.capacity, "must be at least 1")?;
        check(
            (1..=MAX_PAGE_SIZE).contains(&self.max_page_size),
            "max_page_size",
            self.max_page_size,
            &format!("must be in 1..={MAX_PAGE_SIZE}"),
        )?;
        check(
            (1..=self.max_page_size).contains(&self.page_size),
            "page_size",
            self.page_size,
            "must be in 1..=max_page_size",
        )?;
        check((1..=32).contains(&self.hop_ceiling), "hop_ceiling", self.hop_ceiling, "must be in 1..=32")?;
        check(self.context_turns >= 1, "context_turns", self.context_turns, "must be at least 1")?;
        check(self.request_timeout_ms >= 1, "request_timeout_ms", self.request_timeout_ms, "must be at least 1")?;
        let last = self.providers.len().saturating_sub(1);
        for (i, p) in self.providers.iter().enumerate() {
            if p.kind == ProviderKind::DeterministicStub {
                check(i == last, &format!("providers[{i}].kind"), "deterministic_stub", "the stub must be last")?;
                continue;
            }
            check(!p.endpoint.is_empty(), &format!("providers[{i}].endpoint"), "", "must not be empty")?;
            check(p.timeout_ms >= 1, &format!("providers[{i}].timeout_ms"), p.timeout_ms, "must be at least 1")?;
        }
        Ok(())
    }

    pub fn cache_config(&self) -> CacheConfig {
        CacheConfig {
            ttl: Duration::from_secs(self.cache.ttl_secs),
            capacity: self.cache.capacity,
            semantic_threshold: self.cache.semantic_threshold,
        }
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_millis(self.request_timeout_ms)
    }
}
