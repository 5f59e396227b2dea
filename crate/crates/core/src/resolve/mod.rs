//! Entity resolution over staged records.
//!
//! One [`ResolvedEntity`] is created per distinct surface; entities whose
//! surfaces normalize identically share an `entity_id` until merged.
//! Candidate pairs come from three tiers (lexical identity, rule-table
//! equivalence, embedding cosine) and are reported, never merged
//! implicitly. [`apply_merges`] folds accepted pairs with union-find.

mod candidates;
mod embed;
mod merge;
mod normalize;
mod rules;
mod table;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use candidates::find_merge_candidates;
pub use embed::{cosine, fnv1a, trigrams, EmbeddingProvider, HttpEmbedder, TrigramEmbedder, TRIGRAM_DIMENSION};
pub use merge::apply_merges;
pub use normalize::{compact, family, normalize_with};
pub use rules::{AliasList, CodePrefix, Rules};
pub use table::{
    candidates_from_staging, resolve_staging, write_report, EntityTable, Resolution, ENTITIES_JSON,
};

#[derive(Debug, thiserror::Error)]
pub enum ResolveError {
    #[error("surface is empty after normalization")]
    EmptySurface,
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("entities of mixed kinds: {0} and {1}")]
    MixedKinds(EntityKind, EntityKind),
    #[error("threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("merge references unknown {kind} entity {canonical:?}")]
    UnknownEntity { kind: EntityKind, canonical: String },
    #[error("invalid rule table: {0}")]
    Rules(String),
    #[error("embedding provider: {0}")]
    Provider(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Manufacturer,
    Model,
    Airport,
    Airline,
    Location,
}

impl EntityKind {
    pub const ALL: [EntityKind; 5] = [
        EntityKind::Manufacturer,
        EntityKind::Model,
        EntityKind::Airport,
        EntityKind::Airline,
        EntityKind::Location,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Manufacturer => "manufacturer",
            EntityKind::Model => "model",
            EntityKind::Airport => "airport",
            EntityKind::Airline => "airline",
            EntityKind::Location => "location",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown entity kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCandidate {
    pub surface: String,
    pub kind: EntityKind,
    /// event_id of the record the surface came from.
    pub source_record: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResolvedEntity {
    pub entity_id: String,
    pub canonical: String,
    pub kind: EntityKind,
    pub aliases: BTreeSet<String>,
}

impl ResolvedEntity {
    pub fn from_surface(surface: &str, kind: EntityKind, rules: &Rules) -> Result<Self, ResolveError> {
        let surface = surface.trim();
        let canonical = normalize_with(surface, kind, rules);
        if canonical.is_empty() {
            return Err(ResolveError::EmptySurface);
        }
        Ok(ResolvedEntity {
            entity_id: entity_id(kind, &canonical),
            canonical,
            kind,
            aliases: BTreeSet::from([surface.to_string()]),
        })
    }
}

/// Content-derived id: the first 16 hex digits of SHA-256 over
/// `kind 0x1f canonical`.
pub fn entity_id(kind: EntityKind, canonical: &str) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_str().as_bytes());
    h.update([0x1f]);
    h.update(canonical.as_bytes());
    format!("ent_{}", &hex::encode(h.finalize())[..16])
}

/// Declared in ascending priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Embedding,
    Lexical,
    Rule,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Embedding => "embedding",
            Tier::Lexical => "lexical",
            Tier::Rule => "rule",
        }
    }

    /// Tiers merged by `resolve --apply` without review.
    pub fn auto_applicable(self) -> bool {
        matches!(self, Tier::Lexical | Tier::Rule)
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Tier::Embedding, Tier::Lexical, Tier::Rule]
            .into_iter()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| format!("unknown tier {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeCandidate {
    pub left: ResolvedEntity,
    pub right: ResolvedEntity,
    /// Embedding cosine of the two canonicals, whatever the tier.
    pub similarity: f64,
    pub tier: Tier,
}

pub const DEFAULT_THRESHOLD: f64 = 0.8;

fn default_rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(Rules::default)
}

/// [`normalize_with`] under the bundled rule table.
pub fn normalize(surface: &str, kind: EntityKind) -> String {
    normalize_with(surface, kind, default_rules())
}

/// Embedding under the default trigram provider.
pub fn embed(text: &str) -> Result<Vec<f64>, ResolveError> {
    TrigramEmbedder::default().embed(text)
}

/// Rule table plus embedding provider.
pub struct Resolver {
    pub rules: Rules,
    pub provider: Box<dyn EmbeddingProvider>,
}

impl Default for Resolver {
    fn default() -> Self {
        Resolver {
            rules: default_rules().clone(),
            provider: Box::new(TrigramEmbedder::default()),
        }
    }
}

impl Resolver {
    pub fn normalize(&self, surface: &str, kind: EntityKind) -> String {
        normalize_with(surface, kind, &self.rules)
    }

    /// One entity per distinct (kind, trimmed surface), in first-seen order.
    pub fn entities(&self, candidates: &[EntityCandidate]) -> Result<Vec<ResolvedEntity>, ResolveError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for c in candidates {
            let surface = c.surface.trim();
            if surface.is_empty() {
                return Err(ResolveError::EmptySurface);
            }
            if seen.insert((c.kind, surface.to_string())) {
                out.push(ResolvedEntity::from_surface(surface, c.kind, &self.rules)?);
            }
        }
        Ok(out)
    }

    pub fn entity(&self, surface: &str, kind: EntityKind) -> Result<ResolvedEntity, ResolveError> {
        ResolvedEntity::from_surface(surface, kind, &self.rules)
    }

    pub fn find_merge_candidates(
        &self,
        entities: &[ResolvedEntity],
        threshold: f64,
    ) -> Result<Vec<MergeCandidate>, ResolveError> {
        find_merge_candidates(entities, threshold, &self.rules, self.provider.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_content_derived() {
        assert_eq!(entity_id(EntityKind::Model, "737-800"), entity_id(EntityKind::Model, "737-800"));
        assert_ne!(entity_id(EntityKind::Model, "737-800"), entity_id(EntityKind::Manufacturer, "737-800"));
        assert_eq!(entity_id(EntityKind::Model, "x").len(), 20);
    }

    #[test]
    fn kinds_parse_case_insensitively() {
        assert_eq!("Model".parse::<EntityKind>().unwrap(), EntityKind::Model);
        assert!("vehicle".parse::<EntityKind>().is_err());
        assert!(Tier::Rule > Tier::Lexical && Tier::Lexical > Tier::Embedding);
    }

    #[test]
    fn punctuation_only_surfaces_are_rejected() {
        let r = Resolver::default();
        assert!(matches!(r.entity("--", EntityKind::Model), Err(ResolveError::EmptySurface)));
    }
}
