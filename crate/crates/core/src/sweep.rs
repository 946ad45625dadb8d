//! Tabular sweep results with provenance metadata, and their CSV/JSON forms.
//!
//! CSV layout: a block of `# key=value` lines (metadata in insertion order),
//! one header line with the column names, then one line per row. Floats are
//! written as `{:.16e}` (17 significant digits) so reruns are byte-comparable.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One table entry. In JSON, non-finite floats are written as the strings
/// `"inf"`, `"-inf"` and `"NaN"`.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawCell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Int(v) => s.serialize_u64(*v),
            Cell::Float(v) if v.is_finite() => s.serialize_f64(*v),
            Cell::Float(v) => s.serialize_str(&v.to_string()),
            Cell::Text(t) => s.serialize_str(t),
        }
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match RawCell::deserialize(d)? {
            RawCell::Int(v) => Cell::Int(v),
            RawCell::Float(v) => Cell::Float(v),
            RawCell::Text(t) => match t.as_str() {
                "inf" | "-inf" | "NaN" => Cell::Float(t.parse().expect("literal")),
                _ => Cell::Text(t),
            },
        })
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
        }
    }

    fn csv(&self, out: &mut String) {
        match self {
            Cell::Float(v) => write!(out, "{v:.16e}").unwrap(),
            Cell::Int(v) => write!(out, "{v}").unwrap(),
            Cell::Text(s) => out.push_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: String,
    /// Resolved configuration and provenance, in insertion order.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl SweepResult {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Self {
            kind: kind.to_string(),
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Set (or overwrite) a metadata entry.
    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.set_meta(key, value);
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column (`None` if absent or non-numeric).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows.iter().map(|r| r[i].as_f64()).collect()
    }

    /// Concatenate rows of two results of the same kind and schema.
    /// Associative; metadata of `self` wins.
    pub fn merge(mut self, other: SweepResult) -> Result<SweepResult> {
        if self.kind != other.kind || self.columns != other.columns {
            return Err(Error::Config(format!(
                "cannot merge '{}' {:?} with '{}' {:?}",
                self.kind, self.columns, other.kind, other.columns
            )));
        }
        for (k, v) in other.meta {
            if self.meta(&k).is_none() {
                self.meta.push((k, v));
            }
        }
        self.rows.extend(other.rows);
        Ok(self)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# kind={}", self.kind).unwrap();
        for (k, v) in &self.meta {
            writeln!(s, "# {k}={}", v.replace('\n', " ")).unwrap();
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                c.csv(&mut s);
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.to_csv_string().as_bytes())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sweep result serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("malformed result JSON: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SweepResult {
        let mut r = SweepResult::new("demo", &["g", "value", "seed"]).with_meta("n", 10);
        r.push(vec![1.0.into(), 0.1.into(), 7u64.into()]).unwrap();
        r.push(vec![2.0.into(), (1.0 / 3.0).into(), u64::MAX.into()]).unwrap();
        r
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# kind=demo");
        assert_eq!(lines[1], "# n=10");
        assert_eq!(lines[2], "g,value,seed");
        assert_eq!(lines[3], "1.0000000000000000e0,1.0000000000000001e-1,7");
        assert!(lines[4].ends_with(",18446744073709551615"));
        let back: f64 = lines[4].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn empty_is_header_only() {
        let r = SweepResult::new("demo", &["a", "b"]);
        assert_eq!(r.to_csv_string(), "# kind=demo\na,b\n");
    }

    #[test]
    fn json_round_trip() {
        let mut r = sample();
        r.push(vec![3.0.into(), f64::INFINITY.into(), 0u64.into()]).unwrap();
        assert_eq!(SweepResult::from_json_str(&r.to_json_string()).unwrap(), r);
    }

    #[test]
    fn merge_checks_schema_and_concatenates() {
        let a = sample();
        let b = sample();
        let m = a.clone().merge(b).unwrap();
        assert_eq!(m.len(), 4);
        let other = SweepResult::new("demo", &["x"]);
        assert!(a.merge(other).is_err());
    }

    #[test]
    fn push_rejects_ragged_rows() {
        let mut r = SweepResult::new("demo", &["a"]);
        assert!(r.push(vec![1.0.into(), 2.0.into()]).is_err());
    }
}
