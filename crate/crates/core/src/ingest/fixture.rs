//! Deterministic synthetic accident extract.
//!
//! Alongside the CSV the generator writes two companion files: a truth file
//! with one line per alias cluster (`kind`, canonical surface, then every
//! surface emitted for it, tab-separated) and a JSON summary of expected
//! graph cardinalities. Both are computed from the generator's own entity
//! catalog, never by re-parsing its output.
//!
//! Manufacturer, operator and city variants differ from the canonical
//! surface only in case, punctuation and company suffixes, so they fold
//! together under lexical normalization. Model variants additionally use
//! manufacturer prefixes (`B737-800`, `Boeing 737-800`).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::ColumnManifest;
use super::IngestError;

struct Make {
    name: &'static str,
    aliases: &'static [&'static str],
    /// Canonical model surface and its prefixed spellings.
    models: &'static [(&'static str, &'static [&'static str])],
    commercial: bool,
    category: &'static str,
    engines: &'static str,
    engine_type: &'static str,
}

const MAKES: &[Make] = &[
    Make {
        name: "Boeing",
        aliases: &["BOEING", "Boeing Co", "The Boeing Company", "Boeing Co."],
        models: &[
            ("737-800", &["B737-800", "Boeing 737-800"]),
            ("747-400", &["B747-400", "Boeing 747-400"]),
            ("757-200", &["B757-200", "Boeing 757-200"]),
            ("767-300", &["B767-300", "Boeing 767-300"]),
            ("777-300ER", &["B777-300ER", "Boeing 777-300ER"]),
            ("787-9", &["B787-9", "Boeing 787-9"]),
        ],
        commercial: true,
        category: "Airplane",
        engines: "2",
        engine_type: "Turbo Fan",
    },
    Make {
        name: "Airbus",
        aliases: &["AIRBUS", "Airbus Industrie", "Airbus S.A.S."],
        models: &[
            ("A320", &["Airbus A320", "a320"]),
            ("A350-900", &["Airbus A350-900", "a350-900"]),
            ("A330-300", &["Airbus A330-300", "a330-300"]),
        ],
        commercial: true,
        category: "Airplane",
        engines: "2",
        engine_type: "Turbo Fan",
    },
    Make {
        name: "Embraer",
        aliases: &["EMBRAER", "Embraer S.A."],
        models: &[("ERJ-145", &["Embraer ERJ-145"]), ("E175", &["Embraer E175"])],
        commercial: true,
        category: "Airplane",
        engines: "2",
        engine_type: "Turbo Fan",
    },
    Make {
        name: "Bombardier",
        aliases: &["BOMBARDIER", "Bombardier Inc"],
        models: &[("CRJ-200", &["Bombardier CRJ-200"]), ("Challenger 604", &["Bombardier Challenger 604"])],
        commercial: true,
        category: "Airplane",
        engines: "2",
        engine_type: "Turbo Fan",
    },
    Make {
        name: "Cessna",
        aliases: &["CESSNA", "Cessna Aircraft Co", "Cessna Aircraft Company"],
        models: &[
            ("172S", &["C172S", "Cessna 172S"]),
            ("182T", &["C182T", "Cessna 182T"]),
            ("208B", &["C208B", "Cessna 208B"]),
        ],
        commercial: false,
        category: "Airplane",
        engines: "1",
        engine_type: "Reciprocating",
    },
    Make {
        name: "Piper",
        aliases: &["PIPER", "Piper Aircraft Inc", "Piper Aircraft"],
        models: &[("PA-28-181", &["Piper PA-28-181"]), ("PA-32R-301", &["Piper PA-32R-301"])],
        commercial: false,
        category: "Airplane",
        engines: "1",
        engine_type: "Reciprocating",
    },
    Make {
        name: "Beechcraft",
        aliases: &["BEECHCRAFT", "Beechcraft Corp"],
        models: &[("G36", &["Beechcraft G36"]), ("King Air 350", &["Beechcraft King Air 350"])],
        commercial: false,
        category: "Airplane",
        engines: "2",
        engine_type: "Turbo Prop",
    },
    Make {
        name: "Cirrus",
        aliases: &["CIRRUS", "Cirrus Design Corp", "Cirrus Aircraft"],
        models: &[("SR22", &["Cirrus SR22"])],
        commercial: false,
        category: "Airplane",
        engines: "1",
        engine_type: "Reciprocating",
    },
    Make {
        name: "Mooney",
        aliases: &["MOONEY", "Mooney Aircraft Corp"],
        models: &[("M20J", &["Mooney M20J"])],
        commercial: false,
        category: "Airplane",
        engines: "1",
        engine_type: "Reciprocating",
    },
    Make {
        name: "Robinson",
        aliases: &["ROBINSON", "Robinson Helicopter Co"],
        models: &[("R44", &["Robinson R44"])],
        commercial: false,
        category: "Helicopter",
        engines: "1",
        engine_type: "Reciprocating",
    },
];

const AIRLINES: &[(&str, &[&str])] = &[
    ("Delta Air Lines", &["DELTA AIR LINES", "Delta Air Lines Inc", "Delta Air Lines, Inc."]),
    ("United Airlines", &["UNITED AIRLINES", "United Airlines Inc"]),
    ("American Airlines", &["AMERICAN AIRLINES", "American Airlines, Inc."]),
    ("Southwest Airlines", &["SOUTHWEST AIRLINES", "Southwest Airlines Co"]),
    ("Alaska Airlines", &["ALASKA AIRLINES", "Alaska Airlines Inc"]),
    ("SkyWest Airlines", &["SKYWEST AIRLINES", "SkyWest Airlines Inc"]),
    ("JetBlue Airways", &["JETBLUE AIRWAYS", "JetBlue Airways Corp"]),
    ("Republic Airways", &["REPUBLIC AIRWAYS", "Republic Airways Inc"]),
];

/// ICAO, city, state, latitude, longitude.
const AIRPORTS: &[(&str, &str, &str, f64, f64)] = &[
    ("KLAX", "Los Angeles", "CA", 33.94, -118.41),
    ("KJFK", "New York", "NY", 40.64, -73.78),
    ("KORD", "Chicago", "IL", 41.98, -87.90),
    ("KATL", "Atlanta", "GA", 33.64, -84.43),
    ("KDFW", "Dallas", "TX", 32.90, -97.04),
    ("KDEN", "Denver", "CO", 39.86, -104.67),
    ("KSEA", "Seattle", "WA", 47.45, -122.31),
    ("KSFO", "San Francisco", "CA", 37.62, -122.38),
    ("KPHX", "Phoenix", "AZ", 33.43, -112.01),
    ("KMIA", "Miami", "FL", 25.79, -80.29),
    ("KBOS", "Boston", "MA", 42.36, -71.01),
    ("KLAS", "Las Vegas", "NV", 36.08, -115.15),
    ("KVNY", "Van Nuys", "CA", 34.21, -118.49),
    ("KFXE", "Fort Lauderdale", "FL", 26.20, -80.17),
    ("KAPA", "Englewood", "CO", 39.57, -104.85),
    ("KPAE", "Everett", "WA", 47.91, -122.28),
];

/// Off-airport locations.
const PLACES: &[(&str, &str, f64, f64)] = &[
    ("Big Bear City", "CA", 34.26, -116.85),
    ("Moab", "UT", 38.57, -109.55),
    ("Talkeetna", "AK", 62.32, -150.11),
    ("Ocala", "FL", 29.19, -82.14),
    ("Lake Havasu City", "AZ", 34.48, -114.32),
    ("Bozeman", "MT", 45.68, -111.04),
    ("Frederick", "MD", 39.41, -77.41),
    ("Hilo", "HI", 19.72, -155.09),
];

const PHASES: &[&str] = &["Takeoff", "Climb", "Cruise", "Approach", "Landing", "Taxi", "Maneuvering"];

const CAUSES: &[&str] = &[
    "The pilot's failure to maintain adequate airspeed during {phase}, which resulted in an aerodynamic stall.",
    "A total loss of engine power during {phase} due to fuel exhaustion.",
    "The flight crew's delayed decision to go around during an unstabilized approach.",
    "Fatigue cracking of a main landing gear component, which resulted in a gear collapse during {phase}.",
    "The pilot's inadequate preflight planning and continued flight into instrument meteorological conditions.",
    "An in-flight fire originating in the engine nacelle during {phase}.",
    "Bird ingestion into the left engine during {phase}, resulting in a partial loss of thrust.",
    "The pilot's misjudgment of distance and altitude while landing on a contaminated runway.",
    "Maintenance personnel's failure to properly secure an oil filler cap, which resulted in oil starvation.",
    "Severe turbulence encountered during {phase}, resulting in serious injuries to a flight attendant.",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub records: usize,
    pub seed: u64,
    pub alias_rate: f64,
}

impl FixtureSpec {
    pub fn new(records: usize, seed: u64, alias_rate: f64) -> Self {
        Self {
            records,
            seed,
            alias_rate,
        }
    }

    /// One malformed row per full hundred records.
    pub fn malformed_rows(&self) -> usize {
        self.records / 100
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AliasCluster {
    /// Resolver entity kind: `manufacturer`, `model`, `airline` or `location`.
    pub kind: String,
    pub canonical: String,
    /// Every distinct surface emitted for this entity in a valid row.
    pub surfaces: Vec<String>,
}

/// Expected contents of the graph built from the fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureCounts {
    pub rows: usize,
    pub records: usize,
    pub malformed: usize,
    pub labels: BTreeMap<String, usize>,
    pub relationship_types: BTreeMap<String, usize>,
    pub alias_clusters: usize,
    pub injected_aliases: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub csv: String,
    pub clusters: Vec<AliasCluster>,
    pub counts: FixtureCounts,
}

pub fn truth_path(csv: &Path) -> PathBuf {
    sibling(csv, ".truth.tsv")
}

pub fn counts_path(csv: &Path) -> PathBuf {
    sibling(csv, ".counts.json")
}

fn sibling(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes the fixture CSV at `path` plus its truth and counts companions.
pub fn gen_fixture(path: &Path, spec: &FixtureSpec) -> Result<FixtureCounts, IngestError> {
    let f = render_fixture(spec)?;
    let io = |path: PathBuf| move |source| IngestError::Io { path, source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    }
    fs::write(path, &f.csv).map_err(io(path.to_path_buf()))?;
    let truth = truth_path(path);
    fs::write(&truth, render_truth(&f.clusters)).map_err(io(truth.clone()))?;
    let counts = counts_path(path);
    fs::write(&counts, serde_json::to_string_pretty(&f.counts)? + "\n").map_err(io(counts.clone()))?;
    Ok(f.counts)
}

pub fn render_truth(clusters: &[AliasCluster]) -> String {
    let mut out = String::new();
    for c in clusters {
        out.push_str(&c.kind);
        out.push('\t');
        out.push_str(&c.canonical);
        for s in &c.surfaces {
            out.push('\t');
            out.push_str(s);
        }
        out.push('\n');
    }
    out
}

pub fn parse_truth(text: &str) -> Vec<AliasCluster> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .filter_map(|l| {
            let mut parts = l.split('\t');
            Some(AliasCluster {
                kind: parts.next()?.to_string(),
                canonical: parts.next()?.to_string(),
                surfaces: parts.map(str::to_string).collect(),
            })
        })
        .collect()
}

#[derive(Clone)]
struct Aircraft {
    registration: String,
    make: usize,
    model: usize,
    operator: Option<usize>,
}

#[derive(Default)]
struct Tally {
    accidents: usize,
    aircraft: BTreeSet<String>,
    operated: BTreeSet<String>,
    makes: BTreeSet<usize>,
    airlines: BTreeSet<usize>,
    airports: BTreeSet<&'static str>,
    locations: BTreeSet<(&'static str, &'static str)>,
    occurred_at: usize,
    surfaces: BTreeMap<(&'static str, String), BTreeSet<String>>,
    injected: usize,
}

#[derive(Clone, Copy)]
enum Malformed {
    BadDate,
    YearMismatch,
    BadInjury,
    BadIcao,
    ShortRow,
    DuplicateId,
}

pub fn render_fixture(spec: &FixtureSpec) -> Result<Fixture, IngestError> {
    if spec.records == 0 {
        return Err(IngestError::InvalidArgument("records must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.alias_rate) {
        return Err(IngestError::InvalidArgument(format!(
            "alias_rate {} outside [0, 1]",
            spec.alias_rate
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let manifest = ColumnManifest::default();
    let n = spec.records;

    // Malformed rows replace normal ones; never row 0 so a duplicate id
    // always has an earlier valid row to copy.
    let mut bad_rows: BTreeMap<usize, Malformed> = BTreeMap::new();
    if n > 1 {
        let kinds = [
            Malformed::BadDate,
            Malformed::YearMismatch,
            Malformed::BadInjury,
            Malformed::BadIcao,
            Malformed::ShortRow,
            Malformed::DuplicateId,
        ];
        let mut kinds = kinds.into_iter().cycle();
        while bad_rows.len() < spec.malformed_rows().min(n - 1) {
            let at = rng.random_range(1..n);
            if !bad_rows.contains_key(&at) {
                bad_rows.insert(at, kinds.next().expect("cycle"));
            }
        }
    }

    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    out.write_record(manifest.columns())?;

    let mut fleet: Vec<Aircraft> = Vec::new();
    let mut registrations: HashSet<String> = HashSet::new();
    let mut tally = Tally::default();
    let mut valid_ids: Vec<String> = Vec::new();
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid").num_days_from_ce();
    let end = NaiveDate::from_ymd_opt(2023, 12, 31).expect("valid").num_days_from_ce();

    for i in 0..n {
        let malformed = bad_rows.remove(&i);
        let valid = malformed.is_none();
        let date = NaiveDate::from_num_days_from_ce_opt(rng.random_range(start..=end)).expect("in range");
        let event_id = format!("{}{:02}{:02}X{:05}", date.year(), date.month(), date.day(), i);

        let craft = if !fleet.is_empty() && rng.random_bool(0.15) {
            fleet[rng.random_range(0..fleet.len())].clone()
        } else {
            let make = rng.random_range(0..MAKES.len());
            let model = rng.random_range(0..MAKES[make].models.len());
            let operator = MAKES[make]
                .commercial
                .then(|| rng.random_range(0..AIRLINES.len()));
            let registration = loop {
                let digits = rng.random_range(1..100_000);
                let suffix: String = (0..rng.random_range(0..=2))
                    .map(|_| (b'A' + rng.random_range(0..26u8)) as char)
                    .collect();
                let r = format!("N{digits}{suffix}");
                if !registrations.contains(&r) {
                    break r;
                }
            };
            let a = Aircraft {
                registration,
                make,
                model,
                operator,
            };
            if valid {
                registrations.insert(a.registration.clone());
                fleet.push(a.clone());
            }
            a
        };
        let make = &MAKES[craft.make];
        let (model_name, model_variants) = make.models[craft.model];

        let (icao, city, state, lat, lon) = if rng.random_bool(0.75) {
            let (icao, city, state, lat, lon) = AIRPORTS[rng.random_range(0..AIRPORTS.len())];
            (icao, city, state, lat, lon)
        } else {
            let (city, state, lat, lon) = PLACES[rng.random_range(0..PLACES.len())];
            ("", city, state, lat, lon)
        };

        // Alias draws happen for every row so the stream does not depend
        // on validity.
        let surface = |rng: &mut ChaCha8Rng, canonical: &'static str, variants: &[&'static str]| {
            if !variants.is_empty() && rng.random_bool(spec.alias_rate) {
                (variants.choose(rng).copied().expect("non-empty"), true)
            } else {
                (canonical, false)
            }
        };
        let make_s = surface(&mut rng, make.name, make.aliases);
        let model_s = surface(&mut rng, model_name, model_variants);
        let op_s = craft.operator.map(|o| surface(&mut rng, AIRLINES[o].0, AIRLINES[o].1));
        let city_upper = city.to_uppercase();
        let city_s = if rng.random_bool(spec.alias_rate) {
            (city_upper.clone(), true)
        } else {
            (city.to_string(), false)
        };

        let injury = ["NONE", "NONE", "MINOR", "SERIOUS", "FATAL"][rng.random_range(0..5)];
        let injury_text = match rng.random_range(0..10) {
            0 => injury.to_lowercase(),
            1 => {
                let mut c = injury.to_lowercase();
                c[..1].make_ascii_uppercase();
                c
            }
            _ => injury.to_string(),
        };
        let date_text = if rng.random_bool(0.2) {
            date.format("%m/%d/%Y").to_string()
        } else {
            date.format("%Y-%m-%d").to_string()
        };
        let year_text = if rng.random_bool(0.1) {
            String::new()
        } else {
            date.year().to_string()
        };
        let phase = PHASES[rng.random_range(0..PHASES.len())];
        let cause = CAUSES[rng.random_range(0..CAUSES.len())].replace("{phase}", &phase.to_lowercase());
        let (fatal, serious, minor) = match injury {
            "FATAL" => (rng.random_range(1..5), rng.random_range(0..3), rng.random_range(0..3)),
            "SERIOUS" => (0, rng.random_range(1..4), rng.random_range(0..3)),
            "MINOR" => (0, 0, rng.random_range(1..4)),
            _ => (0, 0, 0),
        };
        let uninjured = if make.commercial { rng.random_range(20..180) } else { rng.random_range(0..4) };

        let mut fields: BTreeMap<&str, String> = BTreeMap::new();
        fields.insert("event_id", event_id.clone());
        fields.insert(
            "ntsb_no",
            format!("{}{:02}{}{:03}", &state[..2], date.year() % 100, if fatal > 0 { "FA" } else { "LA" }, i % 1000),
        );
        fields.insert("event_type", if rng.random_bool(0.9) { "ACC" } else { "INC" }.into());
        fields.insert("event_date", date_text);
        fields.insert("event_year", year_text);
        fields.insert("event_time", format!("{:02}{:02}", rng.random_range(0..24), rng.random_range(0..60)));
        fields.insert("city", city_s.0.clone());
        fields.insert("state", state.into());
        fields.insert("country", "USA".into());
        fields.insert("latitude", format!("{:.4}", lat + rng.random_range(-0.05..0.05)));
        fields.insert("longitude", format!("{:.4}", lon + rng.random_range(-0.05..0.05)));
        fields.insert("airport_icao", icao.into());
        fields.insert("acft_make", make_s.0.into());
        fields.insert("acft_model", model_s.0.into());
        fields.insert("registration", craft.registration.clone());
        fields.insert("acft_category", make.category.into());
        fields.insert("num_engines", make.engines.into());
        fields.insert("engine_type", make.engine_type.into());
        fields.insert("amateur_built", "No".into());
        fields.insert("operator_name", op_s.map(|s| s.0.to_string()).unwrap_or_default());
        fields.insert("far_part", if make.commercial { "121" } else { "091" }.into());
        fields.insert("flight_purpose", if make.commercial { "Scheduled" } else { "Personal" }.into());
        fields.insert("flight_phase", phase.into());
        fields.insert(
            "acft_damage",
            ["Substantial", "Minor", "Destroyed", "None"][rng.random_range(0..4)].into(),
        );
        fields.insert("injury_level", injury_text);
        fields.insert("total_fatal", fatal.to_string());
        fields.insert("total_serious", serious.to_string());
        fields.insert("total_minor", minor.to_string());
        fields.insert("total_uninjured", uninjured.to_string());
        fields.insert("weather_condition", if rng.random_bool(0.8) { "VMC" } else { "IMC" }.into());
        fields.insert("light_condition", ["Day", "Night", "Dusk", "Dawn"][rng.random_range(0..4)].into());
        fields.insert("sky_condition", ["Clear", "Scattered", "Broken", "Overcast"][rng.random_range(0..4)].into());
        fields.insert("visibility", rng.random_range(1..=10).to_string());
        fields.insert("wind_speed", rng.random_range(0..30).to_string());
        fields.insert(
            "pilot_cert",
            if make.commercial { "Airline Transport" } else { ["Private", "Commercial", "Student"][rng.random_range(0..3)] }
                .into(),
        );
        fields.insert("pilot_total_hours", rng.random_range(40..25_000).to_string());
        fields.insert("report_status", "Final".into());
        fields.insert("probable_cause", cause);

        match malformed {
            None => {
                tally.accidents += 1;
                tally.aircraft.insert(craft.registration.clone());
                tally.makes.insert(craft.make);
                if let Some(o) = craft.operator {
                    tally.airlines.insert(o);
                    tally.operated.insert(craft.registration.clone());
                }
                if !icao.is_empty() {
                    tally.airports.insert(icao);
                    tally.occurred_at += 1;
                }
                tally.locations.insert((city, state));
                let mut note = |kind: &'static str, canonical: String, s: String, injected: bool| {
                    tally.surfaces.entry((kind, canonical)).or_default().insert(s);
                    if injected {
                        tally.injected += 1;
                    }
                };
                note("manufacturer", make.name.into(), make_s.0.into(), make_s.1);
                note("model", model_name.into(), model_s.0.into(), model_s.1);
                if let (Some(o), Some(s)) = (craft.operator, op_s) {
                    note("airline", AIRLINES[o].0.into(), s.0.into(), s.1);
                }
                note("location", format!("{city}, {state}"), format!("{}, {state}", city_s.0), city_s.1);
                valid_ids.push(event_id);
            }
            Some(Malformed::BadDate) => {
                fields.insert("event_date", format!("{}-13-{:02}", date.year(), date.day()));
            }
            Some(Malformed::YearMismatch) => {
                fields.insert("event_year", (date.year() + 1).to_string());
            }
            Some(Malformed::BadInjury) => {
                fields.insert("injury_level", "CRITICAL".into());
            }
            Some(Malformed::BadIcao) => {
                fields.insert("airport_icao", "KXXXX".into());
            }
            Some(Malformed::DuplicateId) => {
                let copy = valid_ids.choose(&mut rng).cloned().unwrap_or_default();
                fields.insert("event_id", copy);
            }
            Some(Malformed::ShortRow) => {}
        }
        let mut row: Vec<String> = manifest
            .columns()
            .iter()
            .map(|c| fields.remove(c.as_str()).unwrap_or_default())
            .collect();
        if let Some(Malformed::ShortRow) = malformed {
            row.truncate(row.len() - 3);
        }
        out.write_record(&row)?;
    }

    let bytes = out.into_inner().map_err(|e| IngestError::Io {
        path: PathBuf::from("<fixture buffer>"),
        source: e.into_error(),
    })?;
    let csv = String::from_utf8(bytes).expect("fixture is ASCII");

    let clusters: Vec<AliasCluster> = tally
        .surfaces
        .iter()
        .filter(|((_, canonical), surfaces)| surfaces.iter().any(|s| s != canonical))
        .map(|((kind, canonical), surfaces)| AliasCluster {
            kind: kind.to_string(),
            canonical: canonical.clone(),
            surfaces: surfaces.iter().cloned().collect(),
        })
        .collect();

    let mut labels = BTreeMap::new();
    labels.insert("Accident".to_string(), tally.accidents);
    labels.insert("Aircraft".to_string(), tally.aircraft.len());
    labels.insert("Manufacturer".to_string(), tally.makes.len());
    labels.insert("Airline".to_string(), tally.airlines.len());
    labels.insert("Airport".to_string(), tally.airports.len());
    labels.insert("Location".to_string(), tally.locations.len());
    let mut rels = BTreeMap::new();
    rels.insert("INVOLVED_IN".to_string(), tally.accidents);
    rels.insert("MANUFACTURED_BY".to_string(), tally.aircraft.len());
    rels.insert("OPERATED_BY".to_string(), tally.operated.len());
    rels.insert("OCCURRED_AT".to_string(), tally.occurred_at);
    rels.insert("LOCATED_IN".to_string(), tally.accidents);
    // Graph statistics omit empty labels and types.
    labels.retain(|_, v| *v > 0);
    rels.retain(|_, v| *v > 0);

    let malformed = spec.malformed_rows().min(n.saturating_sub(1));
    Ok(Fixture {
        csv,
        counts: FixtureCounts {
            rows: n,
            records: n - malformed,
            malformed,
            labels,
            relationship_types: rels,
            alias_clusters: clusters.len(),
            injected_aliases: tally.injected,
        },
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_inputs_same_bytes() {
        let a = render_fixture(&FixtureSpec::new(100, 7, 0.2)).unwrap();
        let b = render_fixture(&FixtureSpec::new(100, 7, 0.2)).unwrap();
        assert_eq!(a.csv, b.csv);
        assert_ne!(a.csv, render_fixture(&FixtureSpec::new(100, 8, 0.2)).unwrap().csv);
    }

    #[test]
    fn zero_alias_rate_has_no_clusters() {
        let f = render_fixture(&FixtureSpec::new(300, 3, 0.0)).unwrap();
        assert!(f.clusters.is_empty());
        assert_eq!(f.counts.injected_aliases, 0);
    }

    #[test]
    fn malformed_rows_replace_valid_ones() {
        let f = render_fixture(&FixtureSpec::new(1000, 7, 0.2)).unwrap();
        assert_eq!(f.csv.lines().count(), 1001);
        assert_eq!(f.counts.malformed, 10);
        assert_eq!(f.counts.records, 990);
        assert_eq!(f.counts.labels["Accident"], 990);
    }

    #[test]
    fn invalid_arguments() {
        assert!(render_fixture(&FixtureSpec::new(0, 1, 0.1)).is_err());
        assert!(render_fixture(&FixtureSpec::new(5, 1, 1.5)).is_err());
    }

    #[test]
    fn truth_round_trips() {
        let f = render_fixture(&FixtureSpec::new(200, 2, 0.5)).unwrap();
        assert_eq!(parse_truth(&render_truth(&f.clusters)), f.clusters);
        assert!(!f.clusters.is_empty());
    }
}
