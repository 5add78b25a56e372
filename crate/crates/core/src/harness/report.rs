//! Run reports and their on-disk form: `report.json`, one CSV per table and
//! a separate `timing.json` (wall-clock is the only non-reproducible output).

use super::config::ExperimentKind;
use crate::error::{Error, Result};
use crate::stats::RateFit;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Rows of numbers under fixed column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Header row, then one line per row; floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Io("empty CSV".into()))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let row: Vec<f64> = l
                    .split(',')
                    .map(|c| c.parse::<f64>().map_err(|e| Error::Io(format!("bad CSV cell `{c}`: {e}"))))
                    .collect::<Result<_>>()?;
                if row.len() != columns.len() {
                    return Err(Error::Io(format!("CSV row of width {} under {} columns", row.len(), columns.len())));
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            name: name.to_string(),
            columns,
            rows,
        })
    }
}

/// A fitted log-log rate with a normal-approximation 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl FitSummary {
    pub fn new(name: impl Into<String>, fit: &RateFit) -> Self {
        let half = 1.96 * fit.slope_std_err;
        Self {
            name: name.into(),
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            ci_low: fit.slope - half,
            ci_high: fit.slope + half,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
}

impl Relation {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Below => value < threshold,
            Relation::Above => value > threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Below => "<",
            Relation::Above => ">",
        }
    }
}

/// One pass/fail comparison against a configured threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation,
            threshold,
            passed: relation.holds(value, threshold),
        }
    }

    /// A boolean property recorded as `1 >= 1` or `0 >= 1`.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, Relation::AtLeast, 1.0)
    }

    fn is_flag(&self) -> bool {
        self.relation == Relation::AtLeast && self.threshold == 1.0 && (self.value == 0.0 || self.value == 1.0)
    }
}

/// Where the randomness came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub generator: String,
    /// Role of each top-level stream id.
    pub streams: Vec<(u64, String)>,
    pub crate_version: String,
    pub schema_version: u32,
}

/// Flat-float output written next to the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub tables: Vec<Table>,
    pub fits: Vec<FitSummary>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
    pub provenance: Provenance,
    pub passed: bool,
}

impl RunReport {
    pub fn new(kind: ExperimentKind, provenance: Provenance) -> Self {
        Self {
            kind,
            tables: vec![],
            fits: vec![],
            checks: vec![],
            artifacts: vec![],
            provenance,
            passed: true,
        }
    }

    pub fn check(&mut self, check: Check) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} ({})\n", self.kind.name(), if self.passed { "pass" } else { "FAIL" });
        for f in &self.fits {
            let _ = writeln!(
                s,
                "  fit {}: slope {:.4} [{:.4}, {:.4}], R² {:.4}",
                f.name, f.slope, f.ci_low, f.ci_high, f.r_squared
            );
        }
        for c in &self.checks {
            let tag = if c.passed { "pass" } else { "FAIL" };
            if c.is_flag() {
                let _ = writeln!(s, "  [{tag}] {}", c.name);
            } else {
                let _ = writeln!(
                    s,
                    "  [{tag}] {}: {:.6e} {} {:.6e}",
                    c.name,
                    c.value,
                    c.relation.symbol(),
                    c.threshold
                );
            }
        }
        s
    }
}

/// Wall-clock record kept out of the report so reruns stay bitwise identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const TIMING_FILE: &str = "timing.json";

/// Writes the report in each requested format and returns the files written.
pub fn emit(report: &RunReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = vec![];
    for f in formats {
        match f {
            Format::Json => {
                let path = dir.join(REPORT_FILE);
                let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
                fs::write(&path, text + "\n")?;
                written.push(path);
            }
            Format::Csv => {
                for t in &report.tables {
                    let path = dir.join(format!("{}.csv", t.name));
                    fs::write(&path, t.to_csv())?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(dir.join(REPORT_FILE))?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", REPORT_FILE)))
}

pub fn write_timing(dir: &Path, timing: &Timing) -> Result<()> {
    let text = serde_json::to_string_pretty(timing).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join(TIMING_FILE), text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let mut r = RunReport::new(
            ExperimentKind::ExpMoment,
            Provenance {
                seed: 3,
                generator: "g".into(),
                streams: vec![(0, "samples".into())],
                crate_version: "0".into(),
                schema_version: 1,
            },
        );
        let mut t = Table::new("values", &["eps", "mean"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        t.push(vec![1e-300, -2.5e17]);
        r.tables.push(t);
        r.tables.push(Table::new("empty", &["a", "b"]));
        r.check(Check::new("ratio", 1.2, Relation::AtMost, 3.0));
        r
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(Table::new("e", &["a", "b"]).to_csv(), "a,b\n");
    }

    #[test]
    fn emitted_report_parses_back() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample();
        emit(&r, dir.path(), &[Format::Json, Format::Csv]).unwrap();
        assert_eq!(read_report(dir.path()).unwrap(), r);
        let csv = fs::read_to_string(dir.path().join("values.csv")).unwrap();
        assert_eq!(Table::from_csv("values", &csv).unwrap(), r.tables[0]);
        assert_eq!(fs::read_to_string(dir.path().join("empty.csv")).unwrap(), "a,b\n");
    }

    #[test]
    fn failing_check_fails_report() {
        let mut r = sample();
        assert!(r.passed);
        r.check(Check::new("bad", 5.0, Relation::AtMost, 3.0));
        assert!(!r.passed);
    }
}
