//! Rule-based translator. It needs no network and always returns either a
//! schema-valid query or a reason it cannot translate the question.
//!
//! A question is read into a frame (intent, optional grouping and limit,
//! and a list of slot constraints) which is then rendered against the
//! schema. Follow-up questions rewrite the previous turn's query instead:
//! each new constraint replaces the constraints of its slot family.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::build::title_case;
use crate::cypher::{
    parse, AggFunc, BinOp, Expr, Literal, NodePattern, PathPattern, Query, RelDirection, RelPattern, ReturnItem,
    SortItem,
};
use crate::graphstore::{GraphSchema, PropertyGraph, Value};
use crate::resolve::{family, normalize_with, EntityKind, Rules};

use super::context::ConversationContext;

const BUNDLED_LEXICON: &str = include_str!("../../data/lexicon.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LexKind {
    Airline,
    Manufacturer,
    Model,
    Airport,
    City,
}

impl LexKind {
    fn entity_kind(self) -> EntityKind {
        match self {
            LexKind::Airline => EntityKind::Airline,
            LexKind::Manufacturer => EntityKind::Manufacturer,
            LexKind::Model => EntityKind::Model,
            LexKind::Airport => EntityKind::Airport,
            LexKind::City => EntityKind::Location,
        }
    }

    const ALL: [LexKind; 5] = [LexKind::Airline, LexKind::Manufacturer, LexKind::Model, LexKind::Airport, LexKind::City];
}

/// Known entity names keyed by their resolve-module normal form, plus alias
/// groups so that any listed alias finds the same display value.
#[derive(Debug, Clone)]
pub struct Lexicon {
    rules: Rules,
    names: BTreeMap<(LexKind, String), String>,
    groups: BTreeMap<(LexKind, usize), String>,
}

#[derive(Deserialize)]
struct LexiconFile {
    manufacturers: Vec<String>,
    airlines: Vec<String>,
}

impl Lexicon {
    pub fn empty(rules: Rules) -> Self {
        Lexicon {
            rules,
            names: BTreeMap::new(),
            groups: BTreeMap::new(),
        }
    }

    /// Bundled manufacturer and airline names, displayed the way the graph
    /// builder displays them.
    pub fn bundled(rules: Rules) -> Self {
        let file: LexiconFile = toml::from_str(BUNDLED_LEXICON).expect("bundled lexicon parses");
        let mut lex = Lexicon::empty(rules);
        for (kind, names) in [(LexKind::Manufacturer, file.manufacturers), (LexKind::Airline, file.airlines)] {
            for n in names {
                let display = title_case(&lex.key(kind, &n));
                lex.insert(kind, &n, &display);
            }
        }
        lex
    }

    /// Adds every manufacturer, airline, model, airport and city value held
    /// by the graph. Graph values win over bundled ones.
    pub fn extend_from_graph(&mut self, graph: &PropertyGraph) {
        let wanted: [(&str, &str, LexKind); 6] = [
            ("Aircraft", "make", LexKind::Manufacturer),
            ("Manufacturer", "name", LexKind::Manufacturer),
            ("Airline", "name", LexKind::Airline),
            ("Aircraft", "model", LexKind::Model),
            ("Airport", "icao", LexKind::Airport),
            ("Location", "city", LexKind::City),
        ];
        for n in graph.nodes() {
            for (label, prop, kind) in wanted {
                if let (true, Some(Value::Str(v))) = (n.has_label(label), n.get(prop)) {
                    self.insert(kind, v, v);
                }
            }
        }
    }

    fn key(&self, kind: LexKind, surface: &str) -> String {
        normalize_with(surface, kind.entity_kind(), &self.rules)
    }

    fn group(&self, kind: LexKind, key: &str) -> Option<usize> {
        let ek = kind.entity_kind();
        self.rules.alias_group(ek, &family(key, ek, &self.rules))
    }

    pub fn insert(&mut self, kind: LexKind, surface: &str, display: &str) {
        let key = self.key(kind, surface);
        if key.is_empty() {
            return;
        }
        if let Some(g) = self.group(kind, &key) {
            self.groups.insert((kind, g), display.to_string());
        }
        self.names.insert((kind, key), display.to_string());
    }

    pub fn lookup(&self, kind: LexKind, phrase: &str) -> Option<&str> {
        let key = self.key(kind, phrase);
        if key.is_empty() {
            return None;
        }
        self.names
            .get(&(kind, key.clone()))
            .or_else(|| self.group(kind, &key).and_then(|g| self.groups.get(&(kind, g))))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn rules(&self) -> &Rules {
        &self.rules
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::bundled(Rules::default())
    }
}

/// Constraint families. Declaration order is the order constraints appear
/// in a generated WHERE clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Slot {
    Make,
    Model,
    Registration,
    Airline,
    Airport,
    Place,
    Injury,
    Year,
}

impl Slot {
    /// Slots a new constraint of this slot replaces in a follow-up. A new
    /// make invalidates the old model and registration, which belong to it.
    fn replaces(self) -> &'static [Slot] {
        match self {
            Slot::Make => &[Slot::Make, Slot::Model, Slot::Registration],
            Slot::Model => &[Slot::Model, Slot::Registration],
            Slot::Registration => &[Slot::Registration],
            Slot::Airline => &[Slot::Airline],
            Slot::Airport | Slot::Place => &[Slot::Airport, Slot::Place],
            Slot::Injury => &[Slot::Injury],
            Slot::Year => &[Slot::Year],
        }
    }

    fn of(label: &str, property: &str) -> Option<Slot> {
        Some(match (label, property) {
            ("Aircraft", "make") | ("Manufacturer", "name") => Slot::Make,
            ("Aircraft", "model") => Slot::Model,
            ("Aircraft", "registration") => Slot::Registration,
            ("Airline", "name") => Slot::Airline,
            ("Airport", "icao") | ("Airport", "name") => Slot::Airport,
            ("Location", "name" | "city" | "state") => Slot::Place,
            ("Accident", "injury_level") => Slot::Injury,
            ("Accident", "event_year") => Slot::Year,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub slot: Slot,
    pub label: &'static str,
    pub property: &'static str,
    pub op: BinOp,
    pub value: Literal,
}

impl Constraint {
    fn new(slot: Slot, label: &'static str, property: &'static str, op: BinOp, value: Literal) -> Self {
        Constraint {
            slot,
            label,
            property,
            op,
            value,
        }
    }

    fn text(slot: Slot, label: &'static str, property: &'static str, op: BinOp, value: &str) -> Self {
        Self::new(slot, label, property, op, Literal::Str(value.to_string()))
    }

    fn expr(&self, var: &str) -> Expr {
        Expr::bin(Expr::prop(var, self.property), self.op, Expr::Literal(self.value.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intent {
    Find,
    Count,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Year,
    Manufacturer,
    Model,
    Airline,
    State,
    Airport,
}

impl Group {
    fn from_noun(w: &str) -> Option<Group> {
        Some(match w {
            "year" | "years" => Group::Year,
            "manufacturer" | "manufacturers" | "make" | "makes" | "maker" | "makers" => Group::Manufacturer,
            "model" | "models" => Group::Model,
            "airline" | "airlines" | "operator" | "operators" | "carrier" | "carriers" => Group::Airline,
            "state" | "states" => Group::State,
            "airport" | "airports" => Group::Airport,
            _ => return None,
        })
    }

    /// (label, property, column alias) of the grouping key.
    fn key(self) -> (&'static str, &'static str, &'static str) {
        match self {
            Group::Year => ("Accident", "event_year", "year"),
            Group::Manufacturer => ("Aircraft", "make", "manufacturer"),
            Group::Model => ("Aircraft", "model", "model"),
            Group::Airline => ("Airline", "name", "airline"),
            Group::State => ("Location", "state", "state"),
            Group::Airport => ("Airport", "icao", "airport"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub intent: Intent,
    pub group: Option<Group>,
    pub limit: Option<u64>,
    pub follow_up: bool,
    pub constraints: Vec<Constraint>,
}

const STATES: &[(&str, &str)] = &[
    ("AL", "alabama"), ("AK", "alaska"), ("AZ", "arizona"), ("AR", "arkansas"), ("CA", "california"),
    ("CO", "colorado"), ("CT", "connecticut"), ("DE", "delaware"), ("DC", "district of columbia"),
    ("FL", "florida"), ("GA", "georgia"), ("HI", "hawaii"), ("ID", "idaho"), ("IL", "illinois"),
    ("IN", "indiana"), ("IA", "iowa"), ("KS", "kansas"), ("KY", "kentucky"), ("LA", "louisiana"),
    ("ME", "maine"), ("MD", "maryland"), ("MA", "massachusetts"), ("MI", "michigan"), ("MN", "minnesota"),
    ("MS", "mississippi"), ("MO", "missouri"), ("MT", "montana"), ("NE", "nebraska"), ("NV", "nevada"),
    ("NH", "new hampshire"), ("NJ", "new jersey"), ("NM", "new mexico"), ("NY", "new york"),
    ("NC", "north carolina"), ("ND", "north dakota"), ("OH", "ohio"), ("OK", "oklahoma"), ("OR", "oregon"),
    ("PA", "pennsylvania"), ("RI", "rhode island"), ("SC", "south carolina"), ("SD", "south dakota"),
    ("TN", "tennessee"), ("TX", "texas"), ("UT", "utah"), ("VT", "vermont"), ("VA", "virginia"),
    ("WA", "washington"), ("WV", "west virginia"), ("WI", "wisconsin"), ("WY", "wyoming"),
];

const NUMBER_WORDS: &[&str] = &[
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

/// Words that start a follow-up question.
const FOLLOW_UP_PREFIXES: &[&str] = &[
    "what about", "how about", "and what about", "and for", "and in", "and at", "same for", "same but for",
    "now for", "what if it was",
];

const DOMAIN_WORDS: &[&str] = &[
    "accident", "accidents", "incident", "incidents", "crash", "crashes", "event", "events", "record",
    "records", "aircraft", "flight", "flights", "mishap", "mishaps",
];

/// Capitalized sentence openers that never start a city name.
const QUESTION_WORDS: &[&str] = &["find", "show", "list", "which", "what", "where", "when", "how", "count", "give", "get"];

/// Upper-case words that look like airport codes but are English.
const NOT_CODES: &[&str] = &["KIND", "KNOW", "KEEP", "KILL", "PAST", "PLUS", "PER", "PLAN"];

#[derive(Debug, Clone)]
struct Word {
    raw: String,
    lower: String,
    comma: bool,
    used: bool,
}

fn words(q: &str) -> Vec<Word> {
    q.split_whitespace()
        .filter_map(|w| {
            let raw = w.trim_matches(|c: char| !c.is_alphanumeric());
            (!raw.is_empty()).then(|| Word {
                raw: raw.to_string(),
                lower: raw.to_lowercase(),
                comma: w.trim_end_matches(|c: char| !c.is_alphanumeric() && c != ',').ends_with(','),
                used: false,
            })
        })
        .collect()
}

fn number(w: &str) -> Option<u64> {
    if w.chars().all(|c| c.is_ascii_digit()) && w.len() <= 3 {
        return w.parse().ok();
    }
    NUMBER_WORDS.iter().position(|n| *n == w).map(|i| i as u64)
}

fn year(w: &str) -> Option<i64> {
    (w.len() == 4 && w.chars().all(|c| c.is_ascii_digit()))
        .then(|| w.parse().ok())
        .flatten()
        .filter(|y| (1900..=2099).contains(y))
}

fn is_state_code(w: &str) -> bool {
    STATES.iter().any(|(c, _)| *c == w)
}

/// The rule-based translator. Pure: the output depends only on the
/// question, the schema, the context and the lexicon it was built with.
#[derive(Debug, Clone, Default)]
pub struct FallbackTranslator {
    pub lexicon: Lexicon,
}

impl FallbackTranslator {
    pub fn new(lexicon: Lexicon) -> Self {
        FallbackTranslator { lexicon }
    }

    pub fn frame(&self, question: &str) -> Frame {
        let lower = question.trim().to_lowercase();
        let follow_up = FOLLOW_UP_PREFIXES.iter().any(|p| lower.starts_with(p));
        let mut w = words(question);
        let mut constraints = Vec::new();

        let count = lower.contains("how many") || lower.contains("number of") || w.first().is_some_and(|x| x.lower == "count");

        // Limits: "top two", "latest 3", "most recent 5", "first 10".
        let mut limit = None;
        let mut group = None;
        for i in 0..w.len() {
            let lead = matches!(w[i].lower.as_str(), "top" | "latest" | "first" | "last" | "recent");
            if !lead || w[i].used {
                continue;
            }
            match w.get(i + 1).and_then(|n| number(&n.lower)) {
                Some(n) => {
                    limit = Some(n);
                    w[i].used = true;
                    w[i + 1].used = true;
                    if let Some(g) = w.get(i + 2).and_then(|n| Group::from_noun(&n.lower)) {
                        group = Some(g);
                        w[i + 2].used = true;
                    }
                }
                None if w[i].lower == "top" => {
                    limit = Some(10);
                    w[i].used = true;
                    if let Some(g) = w.get(i + 1).and_then(|n| Group::from_noun(&n.lower)) {
                        group = Some(g);
                        w[i + 1].used = true;
                    }
                }
                None => {}
            }
        }
        // Grouping: "per year", "by state", "for each airline".
        for i in 0..w.len().saturating_sub(1) {
            if matches!(w[i].lower.as_str(), "per" | "by" | "each") {
                if let Some(g) = Group::from_noun(&w[i + 1].lower) {
                    group = Some(g);
                    w[i].used = true;
                    w[i + 1].used = true;
                }
            }
        }

        // "City Name, ST"
        for i in 0..w.len().saturating_sub(1) {
            if !(w[i].comma && is_state_code(&w[i + 1].raw)) || w[i].used || w[i + 1].used {
                continue;
            }
            let mut start = i + 1;
            while start > 0 {
                let c = &w[start - 1];
                let capital = c.raw.chars().next().is_some_and(char::is_uppercase);
                let verb = QUESTION_WORDS.contains(&c.lower.as_str());
                if c.used || !capital || verb || i + 1 - start >= 4 || (start - 1 < i && c.comma) {
                    break;
                }
                if start - 1 > 0 && matches!(w[start - 2].lower.as_str(), "in" | "at" | "near" | "around") {
                    start -= 1;
                    break;
                }
                start -= 1;
            }
            if start > i {
                continue;
            }
            let city = title_case(&w[start..=i].iter().map(|x| x.lower.as_str()).collect::<Vec<_>>().join(" "));
            let name = format!("{city}, {}", w[i + 1].raw);
            constraints.push(Constraint::text(Slot::Place, "Location", "name", BinOp::Eq, &name));
            for x in &mut w[start..=i + 1] {
                x.used = true;
            }
        }

        // Years with their comparison words.
        for i in 0..w.len() {
            let Some(y) = (!w[i].used).then(|| year(&w[i].lower)).flatten() else { continue };
            let prev = i.checked_sub(1).map(|p| w[p].lower.as_str()).unwrap_or("");
            let range_end = (matches!(prev, "between" | "from"))
                .then(|| {
                    let joiner = w.get(i + 1).map(|x| x.lower.as_str());
                    matches!(joiner, Some("and" | "to" | "through" | "until" | "thru"))
                        .then(|| w.get(i + 2).and_then(|x| year(&x.lower)))
                        .flatten()
                })
                .flatten();
            let year_c = |op, v| Constraint::new(Slot::Year, "Accident", "event_year", op, Literal::Int(v));
            if let Some(end) = range_end {
                let (lo, hi) = (y.min(end), y.max(end));
                constraints.push(year_c(BinOp::Ge, lo));
                constraints.push(year_c(BinOp::Le, hi));
                for x in &mut w[i - 1..=i + 2] {
                    x.used = true;
                }
                continue;
            }
            let op = match prev {
                "after" => BinOp::Gt,
                "since" => BinOp::Ge,
                "before" => BinOp::Lt,
                "until" | "through" => BinOp::Le,
                _ => BinOp::Eq,
            };
            constraints.push(year_c(op, y));
            w[i].used = true;
        }

        // Lexicon phrases, longest first.
        let mut i = 0;
        while i < w.len() {
            let mut matched = 0;
            'len: for n in (1..=4.min(w.len() - i)).rev() {
                if w[i..i + n].iter().any(|x| x.used) {
                    continue;
                }
                let phrase = w[i..i + n].iter().map(|x| x.raw.as_str()).collect::<Vec<_>>().join(" ");
                for kind in LexKind::ALL {
                    if let Some(display) = self.lexicon.lookup(kind, &phrase) {
                        let c = match kind {
                            LexKind::Airline => Constraint::text(Slot::Airline, "Airline", "name", BinOp::Eq, display),
                            LexKind::Manufacturer => Constraint::text(Slot::Make, "Aircraft", "make", BinOp::Eq, display),
                            LexKind::Model => {
                                self.push_model(&mut constraints, &phrase);
                                matched = n;
                                break 'len;
                            }
                            LexKind::Airport => Constraint::text(Slot::Airport, "Airport", "icao", BinOp::Eq, display),
                            LexKind::City => Constraint::text(Slot::Place, "Location", "city", BinOp::Eq, display),
                        };
                        constraints.push(c);
                        matched = n;
                        break 'len;
                    }
                }
            }
            if matched > 0 {
                for x in &mut w[i..i + matched] {
                    x.used = true;
                }
                i += matched;
            } else {
                i += 1;
            }
        }

        // Codes typed as written: registrations, airports, states.
        for i in 0..w.len() {
            if w[i].used {
                continue;
            }
            let raw = w[i].raw.clone();
            let upper = raw.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit());
            let alpha = raw.chars().all(|c| c.is_ascii_alphabetic());
            let c = if upper
                && raw.len() >= 3
                && raw.starts_with('N')
                && raw[1..2].chars().all(|c| c.is_ascii_digit())
                && raw.len() <= 6
            {
                Some(Constraint::text(Slot::Registration, "Aircraft", "registration", BinOp::Eq, &raw))
            } else if upper && alpha && raw.len() == 4 && (raw.starts_with('K') || raw.starts_with('P')) && !NOT_CODES.contains(&raw.as_str()) {
                Some(Constraint::text(Slot::Airport, "Airport", "icao", BinOp::Eq, &raw))
            } else if upper && alpha && raw.len() == 2 && is_state_code(&raw) {
                Some(Constraint::text(Slot::Place, "Location", "state", BinOp::Eq, &raw))
            } else {
                None
            };
            if let Some(c) = c {
                constraints.push(c);
                w[i].used = true;
            }
        }

        // State names, two words before one.
        for n in [3usize, 2, 1] {
            for i in 0..w.len().saturating_sub(n - 1) {
                if w[i..i + n].iter().any(|x| x.used) {
                    continue;
                }
                let phrase = w[i..i + n].iter().map(|x| x.lower.as_str()).collect::<Vec<_>>().join(" ");
                if let Some((code, _)) = STATES.iter().find(|(_, name)| *name == phrase) {
                    constraints.push(Constraint::text(Slot::Place, "Location", "state", BinOp::Eq, code));
                    for x in &mut w[i..i + n] {
                        x.used = true;
                    }
                }
            }
        }

        // Injury severity.
        for i in 0..w.len() {
            if w[i].used {
                continue;
            }
            let next = w.get(i + 1).map(|x| x.lower.as_str());
            let (op, level, pair) = match (w[i].lower.as_str(), next) {
                ("non" | "not", Some("fatal")) => (BinOp::Ne, "FATAL", true),
                ("nonfatal" | "non-fatal", _) => (BinOp::Ne, "FATAL", false),
                ("fatal" | "fatalities" | "deadly", _) => (BinOp::Eq, "FATAL", false),
                ("serious", _) => (BinOp::Eq, "SERIOUS", false),
                ("minor", _) => (BinOp::Eq, "MINOR", false),
                ("no" | "without", Some("injuries" | "injury")) => (BinOp::Eq, "NONE", true),
                ("uninjured", _) => (BinOp::Eq, "NONE", false),
                _ => continue,
            };
            if constraints.iter().any(|c: &Constraint| c.slot == Slot::Injury) {
                continue;
            }
            constraints.push(Constraint::text(Slot::Injury, "Accident", "injury_level", op, level));
            w[i].used = true;
            if pair {
                w[i + 1].used = true;
            }
        }

        // Remaining designators with a digit are model codes; a code letter
        // such as B or A may name the manufacturer too.
        for i in 0..w.len() {
            let raw = w[i].raw.clone();
            if w[i].used || !raw.chars().any(|c| c.is_ascii_digit()) {
                continue;
            }
            if raw.chars().all(|c| c.is_ascii_digit()) && raw.len() < 3 {
                continue;
            }
            self.push_model(&mut constraints, &raw);
            w[i].used = true;
        }

        constraints.sort_by_key(|c| c.slot);
        let intent = if group.is_some() || count {
            Intent::Count
        } else if limit.is_some() {
            Intent::Top
        } else {
            Intent::Find
        };
        Frame {
            intent,
            group,
            limit,
            follow_up,
            constraints,
        }
    }

    /// Model constraint for a designator, plus the manufacturer a code
    /// letter names (`B737` is a Boeing) unless one is already present.
    fn push_model(&self, constraints: &mut Vec<Constraint>, designator: &str) {
        let rules = self.lexicon.rules();
        let normal = normalize_with(designator, EntityKind::Model, rules);
        let fam = family(&normal, EntityKind::Model, rules);
        if fam != normal && !constraints.iter().any(|c| c.slot == Slot::Make) {
            let maker = normal.split(' ').next().unwrap_or_default();
            let display = self
                .lexicon
                .lookup(LexKind::Manufacturer, maker)
                .map(str::to_string)
                .unwrap_or_else(|| title_case(maker));
            constraints.push(Constraint::text(Slot::Make, "Aircraft", "make", BinOp::Eq, &display));
        }
        if !constraints.iter().any(|c| c.slot == Slot::Model) {
            constraints.push(Constraint::text(Slot::Model, "Aircraft", "model", BinOp::Contains, &fam.to_uppercase()));
        }
    }

    /// Query text for `question`, or the reason it cannot be translated.
    pub fn translate(&self, question: &str, schema: &GraphSchema, context: &ConversationContext) -> Result<String, String> {
        let frame = self.frame(question);
        if frame.follow_up {
            if let Some(prev) = context.turns.last() {
                if !frame.constraints.is_empty() {
                    let q = parse(&prev.query).map_err(|e| format!("previous query no longer parses: {e}"))?;
                    return substitute(q, &frame.constraints, schema).map(|q| q.to_string());
                }
            }
        }
        let lower = question.to_lowercase();
        let on_topic = !frame.constraints.is_empty()
            || frame.group.is_some()
            || words(&lower).iter().any(|w| DOMAIN_WORDS.contains(&w.lower.as_str()));
        if !on_topic {
            return Err("no accident, aircraft or entity terms recognized".into());
        }
        render(&frame, schema).map(|q| q.to_string())
    }
}

/// Variable to label for every labelled node position.
fn labels_of(q: &Query) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    for p in &q.patterns {
        for n in p.nodes() {
            if let (Some(v), Some(l)) = (&n.variable, &n.label) {
                if !out.iter().any(|(x, _)| x == v) {
                    out.push((v.clone(), l.clone()));
                }
            }
        }
    }
    out
}

fn var_for(q: &Query, label: &str) -> Option<String> {
    labels_of(q).into_iter().find(|(_, l)| l == label).map(|(v, _)| v)
}

fn fresh_var(q: &Query, label: &str) -> String {
    let base = match label {
        "Accident" => "x".to_string(),
        "Aircraft" => "a".to_string(),
        "Airport" => "p".to_string(),
        "Location" => "l".to_string(),
        "Airline" => "o".to_string(),
        "Manufacturer" => "m".to_string(),
        other => other.chars().next().map_or("n".to_string(), |c| c.to_lowercase().collect()),
    };
    let taken = q.bound_variables().into_iter().map(str::to_string).collect::<Vec<_>>();
    if !taken.contains(&base) {
        return base;
    }
    (2..).map(|i| format!("{base}{i}")).find(|v| !taken.contains(v)).expect("unbounded")
}

fn node(var: &str, label: &str) -> NodePattern {
    NodePattern {
        variable: Some(var.to_string()),
        label: Some(label.to_string()),
        properties: Vec::new(),
    }
}

fn rel(rel_type: &str, direction: RelDirection) -> RelPattern {
    RelPattern {
        variable: None,
        rel_type: Some(rel_type.to_string()),
        direction,
        hops: None,
    }
}

/// Adds a node labelled `label` joined to an existing variable by a single
/// schema relationship and returns the new variable. The step extends a
/// pattern ending at that variable when the relationship points away from
/// it; otherwise it forms a new comma-separated pattern.
fn attach(q: &mut Query, label: &str, schema: &GraphSchema) -> Result<String, String> {
    let existing = labels_of(q);
    for (var, from) in &existing {
        for (rel_type, ends) in &schema.relationship_types {
            for (src, dst) in ends {
                let dir = if src == from && dst == label {
                    RelDirection::Out
                } else if dst == from && src == label {
                    RelDirection::In
                } else {
                    continue;
                };
                let new = fresh_var(q, label);
                let step = (rel(rel_type, dir), node(&new, label));
                let tail = q.patterns.iter_mut().find(|p| {
                    p.nodes().last().and_then(|n| n.variable.as_deref()) == Some(var.as_str())
                });
                match tail {
                    Some(p) if dir == RelDirection::Out => p.steps.push(step),
                    _ => q.patterns.push(PathPattern {
                        start: NodePattern {
                            variable: Some(var.clone()),
                            label: None,
                            properties: Vec::new(),
                        },
                        steps: vec![step],
                    }),
                }
                return Ok(new);
            }
        }
    }
    Err(format!("the schema has no relationship reaching :{label}"))
}

/// Labels on a shortest schema path from any label already bound in `q` to
/// `label`, excluding the start and including `label`.
fn label_route(q: &Query, label: &str, schema: &GraphSchema) -> Option<Vec<String>> {
    let mut prev: BTreeMap<String, Option<String>> = BTreeMap::new();
    let mut frontier: Vec<String> = Vec::new();
    for (_, l) in labels_of(q) {
        if prev.insert(l.clone(), None).is_none() {
            frontier.push(l);
        }
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for from in &frontier {
            for ends in schema.relationship_types.values() {
                for (src, dst) in ends {
                    let other = if src == from { dst } else if dst == from { src } else { continue };
                    if !prev.contains_key(other) {
                        prev.insert(other.clone(), Some(from.clone()));
                        next.push(other.clone());
                    }
                }
            }
        }
        if prev.contains_key(label) {
            let mut route = vec![label.to_string()];
            while let Some(Some(p)) = prev.get(route.last().unwrap()) {
                route.push(p.clone());
            }
            route.pop();
            route.reverse();
            return Some(route);
        }
        frontier = next;
    }
    None
}

fn ensure_var(q: &mut Query, label: &str, schema: &GraphSchema) -> Result<String, String> {
    if let Some(v) = var_for(q, label) {
        return Ok(v);
    }
    let route = label_route(q, label, schema).ok_or_else(|| format!("the schema has no relationship reaching :{label}"))?;
    let mut var = String::new();
    for hop in &route {
        var = match var_for(q, hop) {
            Some(v) => v,
            None => attach(q, hop, schema)?,
        };
    }
    Ok(var)
}

fn empty_query() -> Query {
    Query {
        patterns: Vec::new(),
        where_clause: None,
        distinct: false,
        returns: Vec::new(),
        order_by: Vec::new(),
        skip: None,
        limit: None,
    }
}

fn render(frame: &Frame, schema: &GraphSchema) -> Result<Query, String> {
    let mut q = empty_query();
    let needs_aircraft = frame.constraints.iter().any(|c| matches!(c.label, "Aircraft" | "Airline"))
        || matches!(frame.group, Some(Group::Manufacturer | Group::Model | Group::Airline));
    let base = if needs_aircraft {
        PathPattern {
            start: node("a", "Aircraft"),
            steps: vec![(rel("INVOLVED_IN", RelDirection::Out), node("x", "Accident"))],
        }
    } else {
        PathPattern {
            start: node("x", "Accident"),
            steps: Vec::new(),
        }
    };
    q.patterns.push(base);

    let mut conjuncts = Vec::new();
    for c in &frame.constraints {
        let v = ensure_var(&mut q, c.label, schema)?;
        conjuncts.push(c.expr(&v));
    }
    q.where_clause = Expr::conjoin(conjuncts);

    let x = var_for(&q, "Accident").expect("base pattern binds the accident");
    match frame.intent {
        Intent::Count => {
            let extra = q.bound_variables().len() > 1 || frame.group.is_some_and(|g| g.key().0 != "Accident");
            let mut returns = Vec::new();
            let mut order = Vec::new();
            let key_alias = match frame.group {
                Some(g) => {
                    let (label, prop, alias) = g.key();
                    let v = ensure_var(&mut q, label, schema)?;
                    returns.push(ReturnItem {
                        expr: Expr::prop(&v, prop),
                        alias: Some(alias.to_string()),
                    });
                    Some(alias)
                }
                None => None,
            };
            let distinct = extra || q.bound_variables().len() > 1;
            returns.push(ReturnItem {
                expr: Expr::Agg {
                    func: AggFunc::Count,
                    distinct,
                    arg: Some(Box::new(Expr::Var(x.clone()))),
                },
                alias: Some("accidents".into()),
            });
            if let Some(alias) = key_alias {
                if frame.limit.is_some() {
                    order.push(SortItem {
                        expr: Expr::Var("accidents".into()),
                        descending: true,
                    });
                }
                order.push(SortItem {
                    expr: Expr::Var(alias.into()),
                    descending: false,
                });
                q.limit = frame.limit;
            }
            q.returns = returns;
            q.order_by = order;
        }
        Intent::Top | Intent::Find => {
            q.returns = vec![ReturnItem {
                expr: Expr::Var(x.clone()),
                alias: None,
            }];
            if let Some(n) = frame.limit {
                q.order_by = vec![SortItem {
                    expr: Expr::prop(&x, "event_date"),
                    descending: true,
                }];
                q.limit = Some(n);
            }
        }
    }
    Ok(q)
}

/// Slot of a `var.prop op literal` conjunct, given the query's labels.
fn conjunct_slot(e: &Expr, labels: &[(String, String)]) -> Option<Slot> {
    let Expr::Binary(l, _, r) = e else { return None };
    let (Expr::Prop(v, p), Expr::Literal(_)) = (l.as_ref(), r.as_ref()) else { return None };
    let label = labels.iter().find(|(x, _)| x == v).map(|(_, l)| l.as_str())?;
    Slot::of(label, p)
}

/// Rewrites `q` so each constraint replaces the conjuncts of the slots it
/// supersedes. The replacement takes the position of the first removed
/// conjunct; a constraint with nothing to replace is appended.
pub fn substitute(mut q: Query, constraints: &[Constraint], schema: &GraphSchema) -> Result<Query, String> {
    let mut conjuncts: Vec<Option<Expr>> = q
        .where_clause
        .take()
        .map(|w| w.conjuncts().into_iter().cloned().map(Some).collect())
        .unwrap_or_default();

    // Inline property maps become conjuncts so they can be replaced too.
    for p in q.patterns.iter_mut() {
        let nodes = std::iter::once(&mut p.start).chain(p.steps.iter_mut().map(|(_, n)| n));
        for n in nodes {
            if let Some(v) = n.variable.clone() {
                for (k, val) in n.properties.drain(..) {
                    conjuncts.push(Some(Expr::bin(Expr::prop(&v, &k), BinOp::Eq, val)));
                }
            }
        }
    }

    let mut handled: Vec<Slot> = Vec::new();
    for c in constraints {
        let labels = labels_of(&q);
        let var = ensure_var(&mut q, c.label, schema)?;
        let new = c.expr(&var);
        let superseded = |e: &Expr| conjunct_slot(e, &labels).is_some_and(|s| c.slot.replaces().contains(&s));
        let first_removed = if handled.contains(&c.slot) {
            None
        } else {
            let first = conjuncts.iter().position(|e| e.as_ref().is_some_and(&superseded));
            for e in conjuncts.iter_mut() {
                if e.as_ref().is_some_and(&superseded) {
                    *e = None;
                }
            }
            first
        };
        handled.push(c.slot);
        match first_removed {
            Some(i) => conjuncts[i] = Some(new),
            None => conjuncts.push(Some(new)),
        }
    }
    q.where_clause = Expr::conjoin(conjuncts.into_iter().flatten());
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> FallbackTranslator {
        FallbackTranslator::default()
    }

    #[test]
    fn lexicon_resolves_aliases_and_suffixes() {
        let l = Lexicon::default();
        assert_eq!(l.lookup(LexKind::Airline, "Delta"), Some("Delta Air Lines"));
        assert_eq!(l.lookup(LexKind::Airline, "delta air lines, inc."), Some("Delta Air Lines"));
        assert_eq!(l.lookup(LexKind::Manufacturer, "beech"), Some("Beechcraft"));
        assert_eq!(l.lookup(LexKind::Manufacturer, "accidents"), None);
    }

    #[test]
    fn model_codes_carry_their_manufacturer() {
        let f = t().frame("accidents of B737-800 aircraft");
        assert_eq!(f.constraints.len(), 2);
        assert_eq!(f.constraints[0].value, Literal::Str("Boeing".into()));
        assert_eq!(f.constraints[1].value, Literal::Str("737-800".into()));
    }

    #[test]
    fn year_words() {
        let f = t().frame("accidents since 2010");
        assert_eq!(f.constraints[0].op, BinOp::Ge);
        let f = t().frame("accidents from 2012 to 2008");
        assert_eq!(f.constraints.len(), 2);
        assert_eq!(f.constraints[0].value, Literal::Int(2008));
    }

    #[test]
    fn off_topic_questions_are_rejected() {
        let s = GraphSchema::aviation();
        assert!(t().translate("what is the meaning of life", &s, &ConversationContext::new("s")).is_err());
    }

    #[test]
    fn follow_up_without_context_is_a_fresh_question() {
        let s = GraphSchema::aviation();
        let q = t().translate("what about Airbus?", &s, &ConversationContext::new("s")).unwrap();
        assert_eq!(q, "MATCH (a:Aircraft)-[:INVOLVED_IN]->(x:Accident) WHERE a.make = 'Airbus' RETURN x");
    }
}
