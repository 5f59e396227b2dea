use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{apply_merges, EntityCandidate, EntityKind, MergeCandidate, ResolveError, ResolvedEntity, Resolver};
use crate::ingest::StagingSet;

pub const ENTITIES_JSON: &str = "entities.json";

/// Entity surfaces of every record. Locations are `"City, ST"`; empty
/// fields contribute nothing.
pub fn candidates_from_staging(set: &StagingSet) -> Vec<EntityCandidate> {
    let mut out = Vec::new();
    for r in &set.records {
        let location = match (r.city.is_empty(), r.state.is_empty()) {
            (true, _) => String::new(),
            (false, true) => r.city.clone(),
            (false, false) => format!("{}, {}", r.city, r.state),
        };
        for (kind, surface) in [
            (EntityKind::Manufacturer, r.acft_make.as_str()),
            (EntityKind::Model, r.acft_model.as_str()),
            (EntityKind::Airport, r.airport_icao.as_str()),
            (EntityKind::Airline, r.operator_name.as_str()),
            (EntityKind::Location, location.as_str()),
        ] {
            if !surface.trim().is_empty() {
                out.push(EntityCandidate {
                    surface: surface.trim().to_string(),
                    kind,
                    source_record: r.event_id.clone(),
                });
            }
        }
    }
    out
}

/// Resolved entities with a (kind, surface) lookup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<ResolvedEntity>", into = "Vec<ResolvedEntity>")]
pub struct EntityTable {
    entities: Vec<ResolvedEntity>,
    by_alias: HashMap<(EntityKind, String), usize>,
}

impl From<Vec<ResolvedEntity>> for EntityTable {
    fn from(entities: Vec<ResolvedEntity>) -> Self {
        let mut by_alias = HashMap::new();
        for (i, e) in entities.iter().enumerate() {
            for a in &e.aliases {
                by_alias.entry((e.kind, a.clone())).or_insert(i);
            }
        }
        EntityTable { entities, by_alias }
    }
}

impl From<EntityTable> for Vec<ResolvedEntity> {
    fn from(t: EntityTable) -> Self {
        t.entities
    }
}

impl EntityTable {
    pub fn entities(&self) -> &[ResolvedEntity] {
        &self.entities
    }

    pub fn lookup(&self, kind: EntityKind, surface: &str) -> Option<&ResolvedEntity> {
        self.by_alias
            .get(&(kind, surface.trim().to_string()))
            .map(|&i| &self.entities[i])
    }

    pub fn save(&self, path: &Path) -> Result<(), ResolveError> {
        let text = serde_json::to_string_pretty(&self.entities)?;
        fs::write(path, text + "\n").map_err(|source| ResolveError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ResolveError> {
        let text = fs::read_to_string(path).map_err(|source| ResolveError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str::<Vec<ResolvedEntity>>(&text)?.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub entities: EntityTable,
    pub candidates: Vec<MergeCandidate>,
    /// Candidates folded by `apply`; zero when merging is off.
    pub applied: usize,
}

/// Resolves every kind independently. With `apply`, rule and lexical
/// candidates are merged; embedding candidates are only reported.
pub fn resolve_staging(
    set: &StagingSet,
    resolver: &Resolver,
    threshold: f64,
    apply: bool,
) -> Result<Resolution, ResolveError> {
    let all = candidates_from_staging(set);
    let mut entities = Vec::new();
    let mut candidates = Vec::new();
    let mut applied = 0;
    for kind in EntityKind::ALL {
        let of_kind: Vec<EntityCandidate> = all.iter().filter(|c| c.kind == kind).cloned().collect();
        let mut es = resolver.entities(&of_kind)?;
        let found = resolver.find_merge_candidates(&es, threshold)?;
        if apply {
            let accepted: Vec<MergeCandidate> = found.iter().filter(|m| m.tier.auto_applicable()).cloned().collect();
            applied += accepted.len();
            es = apply_merges(&es, &accepted)?;
        }
        entities.extend(es);
        candidates.extend(found);
    }
    Ok(Resolution {
        entities: entities.into(),
        candidates,
        applied,
    })
}

/// Merge report: `left_id,right_id,left_canonical,right_canonical,similarity,tier`.
pub fn write_report<W: Write>(candidates: &[MergeCandidate], out: W) -> Result<(), ResolveError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["left_id", "right_id", "left_canonical", "right_canonical", "similarity", "tier"])?;
    for m in candidates {
        w.write_record([
            m.left.entity_id.as_str(),
            m.right.entity_id.as_str(),
            m.left.canonical.as_str(),
            m.right.canonical.as_str(),
            &format!("{:.6}", m.similarity),
            m.tier.as_str(),
        ])?;
    }
    w.flush().map_err(|source| ResolveError::Io {
        path: PathBuf::from("<merge report>"),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_bytes, render_fixture, ColumnManifest, FixtureSpec};

    #[test]
    fn table_round_trips_through_json() {
        let r = Resolver::default();
        let t: EntityTable = vec![r.entity("B737-800", EntityKind::Model).unwrap()].into();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(ENTITIES_JSON);
        t.save(&p).unwrap();
        let back = EntityTable::load(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.lookup(EntityKind::Model, " B737-800").unwrap().canonical, "boeing 737-800");
        assert!(back.lookup(EntityKind::Manufacturer, "B737-800").is_none());
    }

    #[test]
    fn apply_only_folds_rule_and_lexical() {
        let f = render_fixture(&FixtureSpec::new(400, 3, 0.4)).unwrap();
        let set = parse_bytes(f.csv.as_bytes(), "f.csv", &ColumnManifest::default()).unwrap();
        let r = Resolver::default();
        let off = resolve_staging(&set, &r, 0.8, false).unwrap();
        let on = resolve_staging(&set, &r, 0.8, true).unwrap();
        assert_eq!(off.applied, 0);
        assert_eq!(on.candidates, off.candidates);
        let auto = off.candidates.iter().filter(|m| m.tier.auto_applicable()).count();
        assert_eq!(on.applied, auto);
        assert!(on.entities.entities().len() < off.entities.entities().len());
    }

    #[test]
    fn report_has_header_and_one_row_per_candidate() {
        let r = Resolver::default();
        let es: Vec<_> = ["B737-800", "737-800"].iter().map(|s| r.entity(s, EntityKind::Model).unwrap()).collect();
        let c = r.find_merge_candidates(&es, 0.8).unwrap();
        let mut buf = Vec::new();
        write_report(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "left_id,right_id,left_canonical,right_canonical,similarity,tier");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].ends_with(",rule"));
    }
}
