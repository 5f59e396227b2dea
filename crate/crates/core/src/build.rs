//! Staged records plus resolved entities to a property graph.
//!
//! Node keys: Accident by `event_id`, Aircraft by `registration`, Airport
//! by `icao`, and Manufacturer, Airline and Location by resolved
//! `entity_id`. Surfaces missing from the entity table resolve on the fly
//! without merging, so a build without a resolve step still folds surfaces
//! that normalize identically.

use serde::Serialize;

use crate::graphstore::{
    bulk_import, GraphError, GraphSchema, ImportBatch, ImportReport, NodeKey, NodeSpec, Properties,
    PropertyGraph, RelSpec, SchemaReport, Value,
};
use crate::ingest::{RawRecord, StagingSet};
use crate::resolve::{family, EntityKind, EntityTable, ResolveError, ResolvedEntity, Resolver};

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Schema(#[from] GraphError),
    #[error("record {event_id}: {source}")]
    Entity {
        event_id: String,
        #[source]
        source: ResolveError,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub schema: SchemaReport,
    pub import: ImportReport,
}

/// Passthrough columns stored as integers or floats when they parse.
const INT_COLUMNS: &[&str] = &[
    "total_fatal",
    "total_serious",
    "total_minor",
    "total_uninjured",
    "num_engines",
    "pilot_total_hours",
    "visibility",
    "wind_speed",
];
const FLOAT_COLUMNS: &[&str] = &["latitude", "longitude"];
const AIRCRAFT_COLUMNS: &[&str] = &["acft_category", "num_engines", "engine_type", "amateur_built"];

fn typed(column: &str, raw: &str) -> Value {
    if INT_COLUMNS.contains(&column) {
        if let Ok(i) = raw.parse::<i64>() {
            return Value::Int(i);
        }
    }
    if FLOAT_COLUMNS.contains(&column) {
        if let Ok(f) = raw.parse::<f64>() {
            if f.is_finite() {
                return Value::Float(f);
            }
        }
    }
    Value::Str(raw.to_string())
}

pub(crate) fn title_case(s: &str) -> String {
    s.split(' ')
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(f) => f.to_uppercase().chain(c).collect::<String>(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Display form of a manufacturer or airline: title-cased canonical.
pub fn display_name(entity: &ResolvedEntity) -> String {
    title_case(&entity.canonical)
}

/// Display form of a model: its rule family upper-cased (`737-800`, `A320`).
pub fn display_model(entity: &ResolvedEntity, resolver: &Resolver) -> String {
    family(&entity.canonical, EntityKind::Model, &resolver.rules).to_uppercase()
}

fn location_surface(r: &RawRecord) -> Option<String> {
    match (r.city.is_empty(), r.state.is_empty()) {
        (true, _) => None,
        (false, true) => Some(r.city.clone()),
        (false, false) => Some(format!("{}, {}", r.city, r.state)),
    }
}

struct Ctx<'a> {
    table: Option<&'a EntityTable>,
    resolver: &'a Resolver,
}

impl Ctx<'_> {
    fn entity(&self, r: &RawRecord, kind: EntityKind, surface: &str) -> Result<ResolvedEntity, BuildError> {
        if let Some(e) = self.table.and_then(|t| t.lookup(kind, surface)) {
            return Ok(e.clone());
        }
        self.resolver.entity(surface, kind).map_err(|source| BuildError::Entity {
            event_id: r.event_id.clone(),
            source,
        })
    }
}

/// Nodes and relationships for every record, in record order.
pub fn build_batch(
    set: &StagingSet,
    table: Option<&EntityTable>,
    resolver: &Resolver,
) -> Result<ImportBatch, BuildError> {
    let ctx = Ctx { table, resolver };
    let mut batch = ImportBatch::new();
    for r in &set.records {
        let accident = NodeKey::new("Accident", "event_id", r.event_id.as_str());
        let mut props = Properties::new();
        props.insert("event_type".into(), r.event_type.as_str().into());
        props.insert("event_date".into(), Value::Date(r.event_date));
        props.insert("event_year".into(), Value::Int(i64::from(r.event_year)));
        for (k, v) in [
            ("city", &r.city),
            ("state", &r.state),
            ("airport_icao", &r.airport_icao),
            ("probable_cause", &r.probable_cause),
        ] {
            if !v.is_empty() {
                props.insert(k.into(), v.as_str().into());
            }
        }
        if let Some(level) = r.injury_level {
            props.insert("injury_level".into(), level.as_str().into());
        }
        for (k, v) in &r.extra {
            if !v.is_empty() && !AIRCRAFT_COLUMNS.contains(&k.as_str()) && set.manifest.position(k).is_some() {
                props.insert(k.clone(), typed(k, v));
            }
        }
        batch.nodes.push(NodeSpec::new(accident.clone(), props));

        if !r.registration.is_empty() {
            let aircraft = NodeKey::new("Aircraft", "registration", r.registration.as_str());
            let make = (!r.acft_make.is_empty())
                .then(|| ctx.entity(r, EntityKind::Manufacturer, &r.acft_make))
                .transpose()?;
            let model = (!r.acft_model.is_empty())
                .then(|| ctx.entity(r, EntityKind::Model, &r.acft_model))
                .transpose()?;
            let airline = (!r.operator_name.is_empty())
                .then(|| ctx.entity(r, EntityKind::Airline, &r.operator_name))
                .transpose()?;

            let mut props = Properties::new();
            for k in AIRCRAFT_COLUMNS {
                if let Some(v) = r.extra.get(*k).filter(|v| !v.is_empty()) {
                    props.insert(k.to_string(), typed(k, v));
                }
            }
            if let Some(m) = &make {
                props.insert("make".into(), display_name(m).into());
            }
            if let Some(m) = &model {
                props.insert("model".into(), display_model(m, resolver).into());
            }
            batch.nodes.push(NodeSpec::new(aircraft.clone(), props));
            batch.relationships.push(RelSpec::new("INVOLVED_IN", aircraft.clone(), accident.clone()));

            for (label, rel, e) in [("Manufacturer", "MANUFACTURED_BY", make), ("Airline", "OPERATED_BY", airline)] {
                if let Some(e) = e {
                    let key = NodeKey::new(label, "entity_id", e.entity_id.as_str());
                    let mut p = Properties::new();
                    p.insert("name".into(), display_name(&e).into());
                    batch.nodes.push(NodeSpec::new(key.clone(), p));
                    batch.relationships.push(RelSpec::new(rel, aircraft.clone(), key));
                }
            }
        }

        if !r.airport_icao.is_empty() {
            let e = ctx.entity(r, EntityKind::Airport, &r.airport_icao)?;
            let icao = r.airport_icao.to_uppercase();
            let key = NodeKey::new("Airport", "icao", icao.as_str());
            let mut p = Properties::new();
            p.insert("name".into(), icao.as_str().into());
            p.insert("entity_id".into(), e.entity_id.into());
            batch.nodes.push(NodeSpec::new(key.clone(), p));
            batch.relationships.push(RelSpec::new("OCCURRED_AT", accident.clone(), key));
        }

        if let Some(surface) = location_surface(r) {
            let e = ctx.entity(r, EntityKind::Location, &surface)?;
            let key = NodeKey::new("Location", "entity_id", e.entity_id.as_str());
            let city = title_case(&r.city.to_lowercase());
            let mut p = Properties::new();
            p.insert("city".into(), city.as_str().into());
            if r.state.is_empty() {
                p.insert("name".into(), city.into());
            } else {
                p.insert("name".into(), format!("{city}, {}", r.state).into());
                p.insert("state".into(), r.state.as_str().into());
            }
            batch.nodes.push(NodeSpec::new(key.clone(), p));
            batch.relationships.push(RelSpec::new("LOCATED_IN", accident, key));
        }
    }
    Ok(batch)
}

/// Applies the aviation schema to an empty graph and imports the batch.
pub fn build_graph(
    set: &StagingSet,
    table: Option<&EntityTable>,
    resolver: &Resolver,
    batch_size: usize,
) -> Result<(PropertyGraph, BuildReport), BuildError> {
    let mut graph = PropertyGraph::new();
    let schema = graph.apply_schema(&GraphSchema::aviation())?;
    let batch = build_batch(set, table, resolver)?.with_batch_size(batch_size.max(1));
    let import = bulk_import(&mut graph, &batch);
    Ok((graph, BuildReport { schema, import }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_bytes, render_fixture, ColumnManifest, FixtureSpec};

    fn staged(n: usize) -> StagingSet {
        let f = render_fixture(&FixtureSpec::new(n, 4, 0.3)).unwrap();
        parse_bytes(f.csv.as_bytes(), "f.csv", &ColumnManifest::default()).unwrap()
    }

    #[test]
    fn titles_and_models() {
        let r = Resolver::default();
        assert_eq!(title_case("delta air lines"), "Delta Air Lines");
        let m = r.entity("B737-800", EntityKind::Model).unwrap();
        assert_eq!(display_model(&m, &r), "737-800");
        let m = r.entity("a320", EntityKind::Model).unwrap();
        assert_eq!(display_model(&m, &r), "A320");
    }

    #[test]
    fn single_write_transactions_resolve_every_endpoint() {
        let set = staged(50);
        let b = build_batch(&set, None, &Resolver::default()).unwrap();
        let report = {
            let mut g = PropertyGraph::new();
            g.apply_schema(&GraphSchema::aviation()).unwrap();
            bulk_import(&mut g, &b.clone().with_batch_size(1))
        };
        assert_eq!(report.relationships_failed, 0, "{:?}", report.failures);
    }

    #[test]
    fn rebuilding_is_a_no_op() {
        let set = staged(80);
        let r = Resolver::default();
        let (mut g, first) = build_graph(&set, None, &r, 64).unwrap();
        assert!(first.import.created() > 0);
        let again = bulk_import(&mut g, &build_batch(&set, None, &r).unwrap());
        assert_eq!(again.created(), 0);
    }
}
