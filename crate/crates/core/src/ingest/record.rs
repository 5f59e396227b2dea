use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum InjuryLevel {
    None,
    Minor,
    Serious,
    Fatal,
}

impl InjuryLevel {
    pub const ALL: [InjuryLevel; 4] = [
        InjuryLevel::None,
        InjuryLevel::Minor,
        InjuryLevel::Serious,
        InjuryLevel::Fatal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InjuryLevel::None => "NONE",
            InjuryLevel::Minor => "MINOR",
            InjuryLevel::Serious => "SERIOUS",
            InjuryLevel::Fatal => "FATAL",
        }
    }
}

impl FromStr for InjuryLevel {
    type Err = String;

    /// Case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == up)
            .ok_or_else(|| format!("injury_level `{s}` is not one of NONE, MINOR, SERIOUS, FATAL"))
    }
}

impl fmt::Display for InjuryLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One validated accident record. Empty strings stand for nulls.
///
/// `event_year == event_date.year()` always holds; `airport_icao` is empty
/// or four upper-case alphanumerics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub event_id: String,
    pub event_type: String,
    pub event_date: NaiveDate,
    pub event_year: i32,
    pub city: String,
    pub state: String,
    pub airport_icao: String,
    pub acft_make: String,
    pub acft_model: String,
    pub registration: String,
    pub operator_name: String,
    pub injury_level: Option<InjuryLevel>,
    pub probable_cause: String,
    /// Passthrough columns by name.
    pub extra: BTreeMap<String, String>,
}

impl RawRecord {
    /// Text form of a column as written to staging files.
    pub fn field(&self, column: &str) -> String {
        match column {
            "event_id" => self.event_id.clone(),
            "event_type" => self.event_type.clone(),
            "event_date" => self.event_date.format("%Y-%m-%d").to_string(),
            "event_year" => self.event_year.to_string(),
            "city" => self.city.clone(),
            "state" => self.state.clone(),
            "airport_icao" => self.airport_icao.clone(),
            "acft_make" => self.acft_make.clone(),
            "acft_model" => self.acft_model.clone(),
            "registration" => self.registration.clone(),
            "operator_name" => self.operator_name.clone(),
            "injury_level" => self.injury_level.map(|l| l.as_str().to_string()).unwrap_or_default(),
            "probable_cause" => self.probable_cause.clone(),
            other => self.extra.get(other).cloned().unwrap_or_default(),
        }
    }

    pub fn year_matches_date(&self) -> bool {
        self.event_year == self.event_date.year()
    }
}

/// Code columns are upper-cased; everything else is only trimmed.
pub fn is_code_column(column: &str) -> bool {
    matches!(
        column,
        "event_type" | "state" | "airport_icao" | "registration" | "injury_level" | "country"
    )
}

pub fn normalize_field(column: &str, raw: &str) -> String {
    let t = raw.trim();
    if is_code_column(column) {
        t.to_uppercase()
    } else {
        t.to_string()
    }
}

/// ISO `YYYY-MM-DD` or US `MM/DD/YYYY`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%Y"))
        .ok()
}
