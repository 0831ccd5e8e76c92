//! Experiment reports: pass/fail checks, a JSON summary and CSV tables.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{OutputSpec, Verb};
use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Within(f64, f64),
}

impl Bound {
    fn admits(self, v: f64) -> bool {
        match self {
            Bound::AtMost(b) => v <= b,
            Bound::AtLeast(b) => v >= b,
            Bound::Within(a, b) => a <= v && v <= b,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtMost(b) => write!(f, "<= {b:e}"),
            Bound::AtLeast(b) => write!(f, ">= {b:e}"),
            Bound::Within(a, b) => write!(f, "in [{a}, {b}]"),
        }
    }
}

/// One configured assertion. A NaN value never passes.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "ok  " } else { "FAIL" };
        write!(f, "{tag} {}: {:e} {}", self.name, self.value, self.bound)?;
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Io {
            path: self.name.clone(),
            source: e.into_error(),
        })
    }
}

/// Shortest representation that reads back to the same `f64`.
pub fn num(v: f64) -> String {
    v.to_string()
}

#[derive(Debug, Clone)]
pub struct Report {
    pub verb: Verb,
    pub config: Value,
    pub checks: Vec<Check>,
    pub summary: Map<String, Value>,
    pub tables: Vec<Table>,
    /// Files written verbatim, such as sample batches with their own header.
    pub attachments: Vec<(String, Vec<u8>)>,
}

impl Report {
    pub fn new(verb: Verb, config: Value) -> Self {
        Self {
            verb,
            config,
            checks: Vec::new(),
            summary: Map::new(),
            tables: Vec::new(),
            attachments: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, value: f64, bound: Bound) -> bool {
        let pass = !value.is_nan() && bound.admits(value);
        self.checks.push(Check {
            name: name.into(),
            value,
            bound,
            pass,
            note: None,
        });
        pass
    }

    /// A check whose threshold is an empirical calibration rather than a derived bound.
    pub fn calibrated(&mut self, name: &str, value: f64, bound: Bound) -> bool {
        let pass = self.check(name, value, bound);
        if let Some(c) = self.checks.last_mut() {
            c.note = Some("frozen empirical calibration".into());
        }
        pass
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.summary.insert(key.into(), v);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_json(&self, files: &[String]) -> Value {
        serde_json::json!({
            "experiment": self.verb,
            "version": VERSION,
            "passed": self.passed(),
            "checks": self.checks,
            "results": self.summary,
            "files": files,
            "config": self.config,
        })
    }

    /// Writes every table as CSV and the summary as JSON into `dir`, each
    /// through a temporary file renamed into place. Returns the written paths.
    pub fn write(&self, dir: &Path, output: &OutputSpec) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut written = Vec::new();
        let mut names = Vec::new();
        for t in &self.tables {
            let name = format!("{}{}.csv", output.prefix, t.name);
            let path = dir.join(&name);
            atomic_write(&path, &t.to_csv()?)?;
            names.push(name);
            written.push(path);
        }
        for (file, bytes) in &self.attachments {
            let name = format!("{}{file}", output.prefix);
            let path = dir.join(&name);
            atomic_write(&path, bytes)?;
            names.push(name);
            written.push(path);
        }
        let mut body = serde_json::to_vec_pretty(&self.summary_json(&names))?;
        body.push(b'\n');
        let path = dir.join(&output.summary);
        atomic_write(&path, &body)?;
        written.push(path);
        Ok(written)
    }
}

fn io(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io(path, e))?;
    tmp.persist(path).map_err(|e| io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_and_nan() {
        let mut r = Report::new(Verb::Scaling, Value::Null);
        assert!(r.check("a", 0.5, Bound::AtMost(1.0)));
        assert!(!r.check("b", f64::NAN, Bound::AtMost(1.0)));
        assert!(r.check("c", 0.45, Bound::Within(0.4, 0.6)));
        assert!(!r.passed());
        assert_eq!(r.failures().len(), 1);
        assert_eq!(r.failures()[0].name, "b");
    }

    #[test]
    fn csv_quoting_and_round_trip_numbers() {
        let mut t = Table::new("t", &["x", "tag"]);
        t.push(vec![num(0.1), "a,b".into()]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "x,tag\n0.1,\"a,b\"\n");
        let v = 1.0 / 3.0;
        assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn writes_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::new(Verb::Scaling, serde_json::json!({"experiment": "scaling"}));
        r.check("x", 1.0, Bound::AtLeast(0.0));
        let mut t = Table::new("errors", &["n"]);
        t.push(vec!["1".into()]);
        r.tables.push(t);
        let paths = r.write(dir.path(), &OutputSpec::default()).unwrap();
        assert_eq!(paths.len(), 2);
        let summary: Value = serde_json::from_slice(&std::fs::read(&paths[1]).unwrap()).unwrap();
        assert_eq!(summary["version"], VERSION);
        assert_eq!(summary["passed"], true);
        assert_eq!(summary["files"][0], "errors.csv");
        let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 2);
    }
}
