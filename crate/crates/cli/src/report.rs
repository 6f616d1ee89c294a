//! Report assembly: checks with tolerances, CSV tables, JSON output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Exponents};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compare {
    AtMost,
    AtLeast,
    /// No tolerance: reported for information.
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub compare: Compare,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, compare: Compare::AtMost, tolerance: Some(tol), pass: value <= tol }
    }
    pub fn at_least(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, compare: Compare::AtLeast, tolerance: Some(tol), pass: value >= tol }
    }
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            compare: Compare::AtLeast,
            tolerance: Some(1.0),
            pass: ok,
        }
    }
    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), value, compare: Compare::Info, tolerance: None, pass: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// What an experiment hands back.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub checks: Vec<Check>,
    /// Written as `<name>.csv` next to the report.
    pub tables: Vec<(String, Table)>,
    /// Labels such as classification statuses.
    pub labels: Vec<(String, String)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Versions {
    pub morrey_nls: String,
    pub morrey_core: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub versions: Versions,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub exponents: Exponents,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub labels: Vec<(String, String)>,
    pub tables: Vec<String>,
}

impl Report {
    pub fn new(cfg: &ExperimentConfig, exponents: Exponents, outcome: &Outcome) -> Self {
        Self {
            versions: Versions {
                morrey_nls: env!("CARGO_PKG_VERSION").to_string(),
                morrey_core: morrey_core::VERSION.to_string(),
            },
            config_hash: cfg.hash(),
            config: cfg.clone(),
            exponents,
            passed: outcome.passed(),
            checks: outcome.checks.clone(),
            labels: outcome.labels.clone(),
            tables: outcome.tables.iter().map(|(n, _)| format!("{n}.csv")).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Writes `report.json` and one CSV per table into `dir`; returns the report
/// path.
pub fn write(dir: &Path, report: &Report, outcome: &Outcome) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for (name, table) in &outcome.tables {
        let p = dir.join(format!("{name}.csv"));
        fs::write(&p, table.to_csv()).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }
    let p = dir.join("report.json");
    let mut f = fs::File::create(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    writeln!(f, "{}", report.to_json()).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    Ok(p)
}
