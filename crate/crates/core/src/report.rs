//! Machine-readable experiment outputs: fixed-schema CSV artifacts and a JSON
//! report wrapper with config echo, seed, censoring fractions, and verdicts.
//!
//! Formatting is deterministic: rows are written in a fixed order and floats
//! use `{}`/`{:.*}` formatting only, so identical runs produce byte-identical
//! files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

/// In-memory CSV artifact with a fixed header.
#[derive(Debug, Clone)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>, I: IntoIterator<Item = S>>(header: I) -> Csv {
        Csv {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row<S: Into<String>, I: IntoIterator<Item = S>>(&mut self, row: I) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.header.len(), "csv row width mismatch");
        self.rows.push(row);
    }

    pub fn to_string(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.header.join(",")).unwrap();
        for row in &self.rows {
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_string())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Fixed-point float formatting used in all CSV artifacts.
pub fn fmt_f64(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{:.1}", x)
    } else {
        format!("{:.9e}", x)
    }
}

/// Verdict of one declared threshold check.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// JSON report emitted by every subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub subcommand: String,
    pub seed: u64,
    /// Every config key the run used, echoed verbatim.
    pub config: BTreeMap<String, String>,
    /// Named scalar results.
    pub metrics: BTreeMap<String, f64>,
    /// Fractions of censored / truncated samples per estimator, when any.
    pub censoring: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub wall_clock_secs: f64,
}

impl Report {
    pub fn new(subcommand: &str, seed: u64) -> Report {
        Report {
            schema_version: 1,
            subcommand: subcommand.to_string(),
            seed,
            config: BTreeMap::new(),
            metrics: BTreeMap::new(),
            censoring: BTreeMap::new(),
            verdicts: Vec::new(),
            wall_clock_secs: 0.0,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_shape() {
        let mut csv = Csv::new(["k", "value"]);
        csv.push_row(["0".to_string(), fmt_f64(0.5)]);
        csv.push_row(["1".to_string(), fmt_f64(2.0)]);
        let s = csv.to_string();
        assert!(s.starts_with("k,value\n"));
        assert_eq!(s.lines().count(), 3);
    }

    #[test]
    fn report_json_has_stable_keys() {
        let mut r = Report::new("records", 7);
        r.metrics.insert("b".into(), 2.0);
        r.metrics.insert("a".into(), 1.0);
        let json = r.to_json();
        let a_pos = json.find("\"a\"").unwrap();
        let b_pos = json.find("\"b\"").unwrap();
        assert!(a_pos < b_pos);
    }
}
