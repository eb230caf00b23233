//! Run reports and their on-disk form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fitted quantity with its fit residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    pub name: String,
    pub value: f64,
    pub residual: f64,
}

/// One acceptance rule: `value` compared against `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    /// The relation the experiment tests.
    pub statement: String,
    pub config: serde_json::Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub fitted: Vec<Fitted>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    /// Module-level records, verbatim.
    pub details: serde_json::Value,
    pub wall_clock_s: f64,
    pub version: String,
}

impl RunReport {
    pub fn new(experiment: &str, statement: &str, config: serde_json::Value, columns: &[&str]) -> Self {
        RunReport {
            experiment: experiment.to_string(),
            statement: statement.to_string(),
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
            fitted: vec![],
            checks: vec![],
            passed: false,
            error: None,
            warnings: vec![],
            details: serde_json::Value::Null,
            wall_clock_s: 0.0,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn fit(&mut self, name: &str, value: f64, residual: f64) {
        self.fitted.push(Fitted {
            name: name.to_string(),
            value,
            residual,
        });
    }

    /// `value <= threshold` when `upper`, `value >= threshold` otherwise.
    pub fn check(&mut self, name: &str, value: f64, threshold: f64, upper: bool) -> bool {
        let passed = if upper { value <= threshold } else { value >= threshold };
        self.checks.push(Check {
            name: name.to_string(),
            value,
            threshold,
            passed,
        });
        passed
    }

    /// A boolean rule, recorded as `1`/`0` against threshold `1`.
    pub fn check_flag(&mut self, name: &str, ok: bool) -> bool {
        self.check(name, if ok { 1.0 } else { 0.0 }, 1.0, false)
    }

    /// Mark as failed with `err`.
    pub fn fail(&mut self, err: &Error) {
        self.error = Some(err.to_string());
        self.passed = false;
    }

    /// Set `passed` from the checks, then enforce finiteness: rows or
    /// values that are not finite are dropped and the run fails.
    pub fn finalize(&mut self) {
        let mut bad = Vec::new();
        let ncols = self.columns.len();
        self.rows.retain(|r| {
            let ok = r.len() == ncols && r.iter().all(|x| x.is_finite());
            if !ok {
                bad.push(format!("row {r:?}"));
            }
            ok
        });
        self.fitted.retain(|f| {
            let ok = f.value.is_finite() && f.residual.is_finite();
            if !ok {
                bad.push(format!("fitted `{}`", f.name));
            }
            ok
        });
        for c in &mut self.checks {
            if !(c.value.is_finite() && c.threshold.is_finite()) {
                bad.push(format!("check `{}`", c.name));
                c.value = 0.0;
                c.threshold = 0.0;
                c.passed = false;
            }
        }
        if !self.wall_clock_s.is_finite() {
            self.wall_clock_s = 0.0;
        }
        if !bad.is_empty() && self.error.is_none() {
            self.error = Some(format!("non-finite values: {}", bad.join(", ")));
        }
        self.passed = self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
    }

    /// CSV with a header line and one row per point, full precision.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:.16e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{}: {verdict}", self.experiment);
        let _ = writeln!(s, "{}", self.statement);
        if self.rows.is_empty() {
            let _ = writeln!(s, "no points");
        } else {
            let _ = writeln!(s, "{} points", self.rows.len());
        }
        for f in &self.fitted {
            let _ = writeln!(s, "  fit {} = {:.6e} (residual {:.3e})", f.name, f.value, f.residual);
        }
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let _ = writeln!(s, "  [{mark}] {}: {:.6e} vs {:.6e}", c.name, c.value, c.threshold);
        }
        for w in &self.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
        if let Some(e) = &self.error {
            let _ = writeln!(s, "  error: {e}");
        }
        let _ = writeln!(s, "wall clock {:.2} s", self.wall_clock_s);
        s
    }
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf> {
    std::fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Write `report.json`, `table.csv` and `summary.txt` into `dir`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let json = serde_json::to_string_pretty(report)?;
    Ok(vec![
        write_file(dir.join("report.json"), &json)?,
        write_file(dir.join("table.csv"), &report.to_csv())?,
        write_file(dir.join("summary.txt"), &report.summary())?,
    ])
}
