use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use chrono::{Datelike, NaiveDate};

/// A knowledge-base value: an entity or a typed literal.
#[derive(Debug, Clone)]
pub enum Value {
    Entity(String),
    Str(String),
    Number(f64),
    Date(NaiveDate),
}

impl Value {
    pub fn entity(id: impl Into<String>) -> Self {
        Value::Entity(id.into())
    }

    pub fn as_entity(&self) -> Option<&str> {
        match self {
            Value::Entity(id) => Some(id),
            _ => None,
        }
    }

    /// Numeric sort key: numbers as themselves, dates as days from the common era.
    pub fn ordinal(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            Value::Date(d) => Some(d.num_days_from_ce() as f64),
            _ => None,
        }
    }

    /// Parses a literal using the triple-file grammar:
    /// `YYYY-MM-DD` dates, decimal numbers, `"quoted"` strings, otherwise an entity id.
    pub fn parse(raw: &str) -> Result<Value, String> {
        if let Some(rest) = raw.strip_prefix('"') {
            return match rest.strip_suffix('"') {
                Some(inner) => Ok(Value::Str(inner.to_string())),
                None => Err(format!("unclosed string literal `{raw}`")),
            };
        }
        if is_date_shape(raw) {
            return NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .map(Value::Date)
                .map_err(|_| format!("invalid calendar date `{raw}`"));
        }
        if is_decimal(raw) {
            return raw
                .parse::<f64>()
                .map(Value::Number)
                .map_err(|_| format!("unparseable number `{raw}`"));
        }
        if !valid_entity_id(raw) {
            return Err(format!("invalid entity id `{raw}`"));
        }
        Ok(Value::Entity(raw.to_string()))
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Entity(_) => 0,
            Value::Str(_) => 1,
            Value::Number(_) => 2,
            Value::Date(_) => 3,
        }
    }
}

pub fn valid_entity_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(char::is_whitespace)
}

/// `^[0-9]{4}-[0-9]{2}-[0-9]{2}$`
pub(crate) fn is_date_shape(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter().enumerate().all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

/// `^-?[0-9]+(\.[0-9]+)?([eE][-+]?[0-9]+)?$`
pub(crate) fn is_decimal(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if b.first() == Some(&b'-') {
        i += 1;
    }
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > start
    };
    if !digits(&mut i) {
        return false;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        if !digits(&mut i) {
            return false;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        if !digits(&mut i) {
            return false;
        }
    }
    i == b.len()
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Entity(a), Value::Entity(b)) | (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Number(a), Value::Number(b)) => a.total_cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Entity(s) | Value::Str(s) => s.hash(state),
            Value::Number(x) => x.to_bits().hash(state),
            Value::Date(d) => d.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Entity(id) => f.write_str(id),
            Value::Str(s) => write!(f, "\"{s}\""),
            Value::Number(x) => write!(f, "{x}"),
            Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
        }
    }
}
