//! Scalar property values stored on nodes and relationships.

use std::cmp::Ordering;
use std::fmt;

use chrono::NaiveDate;
use serde::Serialize;

/// A property value. Absent properties are simply missing from the map;
/// there is no null variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Date(NaiveDate),
    Str(String),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "boolean",
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Date(_) => "date",
            Value::Str(_) => "string",
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Key used by property indexes. Integral floats collapse onto the
    /// integer key so `1` and `1.0` land in the same bucket.
    pub fn index_key(&self) -> IndexKey {
        match self {
            Value::Bool(b) => IndexKey::Bool(*b),
            Value::Int(i) => IndexKey::Int(*i),
            Value::Float(f) => {
                if f.fract() == 0.0 && f.is_finite() && f.abs() < 9.0e15 {
                    IndexKey::Int(*f as i64)
                } else {
                    IndexKey::Float(f.to_bits())
                }
            }
            Value::Date(d) => IndexKey::Date(*d),
            Value::Str(s) => IndexKey::Str(s.clone()),
        }
    }

    /// Canonical text rendering: no thousands separators, ISO dates.
    pub fn render(&self) -> String {
        match self {
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format_float(*f),
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
            Value::Str(s) => s.clone(),
        }
    }

    /// Equality with numeric widening between integers and floats.
    pub fn loose_eq(&self, other: &Value) -> Option<bool> {
        compare_values(self, other).map(|o| o == Ordering::Equal)
    }
}

/// Orders two values of compatible types; `None` when the types cannot be
/// compared (string vs integer and so on).
pub fn compare_values(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Int(x), Value::Float(y)) => (*x as f64).partial_cmp(y),
        (Value::Float(x), Value::Int(y)) => x.partial_cmp(&(*y as f64)),
        (Value::Float(x), Value::Float(y)) => x.partial_cmp(y),
        (Value::Date(x), Value::Date(y)) => Some(x.cmp(y)),
        (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

pub fn format_float(f: f64) -> String {
    if f.fract() == 0.0 && f.is_finite() && f.abs() < 1e15 {
        format!("{f:.1}")
    } else {
        format!("{f}")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(f: f64) -> Self {
        Value::Float(f)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<NaiveDate> for Value {
    fn from(d: NaiveDate) -> Self {
        Value::Date(d)
    }
}

/// Hashable projection of a [`Value`] used as an index key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexKey {
    Bool(bool),
    Int(i64),
    Float(u64),
    Date(NaiveDate),
    Str(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_float_shares_int_key() {
        assert_eq!(Value::Float(3.0).index_key(), Value::Int(3).index_key());
        assert_ne!(Value::Float(3.5).index_key(), Value::Int(3).index_key());
    }

    #[test]
    fn mixed_types_do_not_compare() {
        assert_eq!(compare_values(&Value::from("1"), &Value::Int(1)), None);
        assert_eq!(
            compare_values(&Value::Int(2), &Value::Float(2.0)),
            Some(Ordering::Equal)
        );
    }

    #[test]
    fn render_has_no_separators() {
        assert_eq!(Value::Int(1234567).render(), "1234567");
        assert_eq!(Value::Float(2.0).render(), "2.0");
        let d = NaiveDate::from_ymd_opt(2003, 7, 14).unwrap();
        assert_eq!(Value::Date(d).render(), "2003-07-14");
    }
}
