//! Graph schema: declared labels and relationship types, unique constraints,
//! single-property and composite indexes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

/// An index over an ordered tuple of properties on one label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct IndexDef {
    pub label: String,
    pub properties: Vec<String>,
}

impl IndexDef {
    pub fn new(label: &str, properties: &[&str]) -> Self {
        Self {
            label: label.to_string(),
            properties: properties.iter().map(|p| p.to_string()).collect(),
        }
    }

    pub fn is_composite(&self) -> bool {
        self.properties.len() > 1
    }
}

impl fmt::Display for IndexDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, ":{}({})", self.label, self.properties.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct UniqueConstraint {
    pub label: String,
    pub property: String,
}

impl UniqueConstraint {
    pub fn new(label: &str, property: &str) -> Self {
        Self {
            label: label.to_string(),
            property: property.to_string(),
        }
    }

    pub fn backing_index(&self) -> IndexDef {
        IndexDef {
            label: self.label.clone(),
            properties: vec![self.property.clone()],
        }
    }
}

impl fmt::Display for UniqueConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, ":{}({}) IS UNIQUE", self.label, self.property)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GraphSchema {
    /// Label → declared property keys.
    pub node_labels: BTreeMap<String, BTreeSet<String>>,
    /// Relationship type → allowed (source label, target label) pairs.
    pub relationship_types: BTreeMap<String, BTreeSet<(String, String)>>,
    pub unique_constraints: BTreeSet<UniqueConstraint>,
    pub indexes: BTreeSet<IndexDef>,
}

impl GraphSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn label(mut self, label: &str, properties: &[&str]) -> Self {
        let entry = self.node_labels.entry(label.to_string()).or_default();
        entry.extend(properties.iter().map(|p| p.to_string()));
        self
    }

    pub fn relationship(mut self, rel_type: &str, source: &str, target: &str) -> Self {
        self.relationship_types
            .entry(rel_type.to_string())
            .or_default()
            .insert((source.to_string(), target.to_string()));
        self
    }

    pub fn unique(mut self, label: &str, property: &str) -> Self {
        let c = UniqueConstraint::new(label, property);
        self.indexes.insert(c.backing_index());
        self.unique_constraints.insert(c);
        self
    }

    pub fn index(mut self, label: &str, properties: &[&str]) -> Self {
        self.indexes.insert(IndexDef::new(label, properties));
        self
    }

    /// The aviation safety graph schema.
    pub fn aviation() -> Self {
        GraphSchema::new()
            .label(
                "Accident",
                &[
                    "event_id",
                    "event_type",
                    "event_date",
                    "event_year",
                    "city",
                    "state",
                    "airport_icao",
                    "injury_level",
                    "probable_cause",
                    "ntsb_no",
                    "country",
                    "latitude",
                    "longitude",
                    "event_time",
                    "acft_damage",
                    "far_part",
                    "flight_purpose",
                    "flight_phase",
                    "weather_condition",
                    "light_condition",
                    "sky_condition",
                    "visibility",
                    "wind_speed",
                    "total_fatal",
                    "total_serious",
                    "total_minor",
                    "total_uninjured",
                    "report_status",
                    "pilot_cert",
                    "pilot_total_hours",
                ],
            )
            .label(
                "Aircraft",
                &[
                    "registration",
                    "make",
                    "model",
                    "acft_category",
                    "num_engines",
                    "engine_type",
                    "amateur_built",
                ],
            )
            .label("Manufacturer", &["name", "entity_id"])
            .label("Airport", &["icao", "name", "entity_id"])
            .label("Airline", &["name", "entity_id"])
            .label("Location", &["name", "city", "state", "entity_id"])
            .relationship("MANUFACTURED_BY", "Aircraft", "Manufacturer")
            .relationship("INVOLVED_IN", "Aircraft", "Accident")
            .relationship("OPERATED_BY", "Aircraft", "Airline")
            .relationship("OCCURRED_AT", "Accident", "Airport")
            .relationship("LOCATED_IN", "Accident", "Location")
            .unique("Aircraft", "registration")
            .unique("Airport", "icao")
            .index("Aircraft", &["make"])
            .index("Accident", &["event_year"])
            .index("Aircraft", &["make", "model"])
            .index("Accident", &["event_id"])
            .index("Manufacturer", &["name"])
            .index("Airline", &["name"])
            .index("Location", &["name"])
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.node_labels.contains_key(label)
    }

    pub fn has_relationship_type(&self, rel_type: &str) -> bool {
        self.relationship_types.contains_key(rel_type)
    }

    pub fn has_property(&self, label: &str, property: &str) -> bool {
        self.node_labels
            .get(label)
            .is_some_and(|props| props.contains(property))
    }

    /// All properties that appear on any label.
    pub fn knows_property(&self, property: &str) -> bool {
        self.node_labels.values().any(|p| p.contains(property))
    }

    pub fn is_empty(&self) -> bool {
        self.node_labels.is_empty()
            && self.relationship_types.is_empty()
            && self.unique_constraints.is_empty()
            && self.indexes.is_empty()
    }

    pub fn constraints_on<'a>(
        &'a self,
        label: &'a str,
    ) -> impl Iterator<Item = &'a UniqueConstraint> + 'a {
        self.unique_constraints
            .iter()
            .filter(move |c| c.label == label)
    }

    pub fn indexes_on<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a IndexDef> + 'a {
        self.indexes.iter().filter(move |i| i.label == label)
    }

    /// Union of two schemas.
    pub fn merged(&self, other: &GraphSchema) -> GraphSchema {
        let mut out = self.clone();
        for (label, props) in &other.node_labels {
            out.node_labels
                .entry(label.clone())
                .or_default()
                .extend(props.iter().cloned());
        }
        for (rt, pairs) in &other.relationship_types {
            out.relationship_types
                .entry(rt.clone())
                .or_default()
                .extend(pairs.iter().cloned());
        }
        for c in &other.unique_constraints {
            out.indexes.insert(c.backing_index());
            out.unique_constraints.insert(c.clone());
        }
        out.indexes.extend(other.indexes.iter().cloned());
        out
    }

    /// Text rendering used by prompts and plan output. Ordering is stable.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("Node labels:\n");
        for (label, props) in &self.node_labels {
            let props: Vec<&str> = props.iter().map(String::as_str).collect();
            s.push_str(&format!("  :{}({})\n", label, props.join(", ")));
        }
        s.push_str("Relationships:\n");
        for (rt, pairs) in &self.relationship_types {
            for (src, tgt) in pairs {
                s.push_str(&format!("  (:{src})-[:{rt}]->(:{tgt})\n"));
            }
        }
        s.push_str("Unique constraints:\n");
        for c in &self.unique_constraints {
            s.push_str(&format!("  {c}\n"));
        }
        s.push_str("Indexes:\n");
        for i in &self.indexes {
            s.push_str(&format!("  {i}\n"));
        }
        s
    }
}

/// Outcome of `apply_schema`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaReport {
    pub unique_constraints: Vec<String>,
    pub indexes: Vec<String>,
    pub changed: bool,
}
