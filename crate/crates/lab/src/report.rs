//! Report assembly and emission: `report.csv`, `report.json` and grid-function files.

use std::fs;
use std::path::{Path, PathBuf};

use pucci_core::grid::{write_gridfn, GridFunction, GridSpec};
use pucci_core::operators::default_tolerance;
use pucci_core::regularity::{ALPHA_FLOOR, FACE_TOL, RESOLVED_TOL};
use pucci_core::solver::CFL_SAFETY;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ScenarioConfig, ScenarioKind};
use crate::LabError;

/// A rectangular CSV table with a mandatory header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

/// Shortest round-trip representation; scientific notation for very small
/// or very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Space-separated coordinates.
pub fn coords(x: &[f64]) -> String {
    x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")
}

/// Outcome of one scenario.
#[derive(Debug, Clone)]
pub struct Report {
    pub scenario: ScenarioKind,
    pub table: Table,
    pub result: Value,
    pub fields: Vec<(String, GridFunction)>,
    /// Class-membership tolerance actually applied, when one was.
    pub class_tolerance: Option<f64>,
}

impl Report {
    pub fn new(scenario: ScenarioKind, table: Table, result: impl Serialize) -> Self {
        Self {
            scenario,
            table,
            result: serde_json::to_value(result).unwrap_or(Value::Null),
            fields: Vec::new(),
            class_tolerance: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: String,
    grid: &'a GridSpec,
    seed: u64,
    tolerances: Value,
    config: Value,
}

/// Full JSON document: provenance, then the scenario result.
pub fn report_json(report: &Report, cfg: &ScenarioConfig) -> Value {
    let provenance = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: report.scenario.to_string(),
        grid: &cfg.grid,
        seed: cfg.seed,
        tolerances: json!({
            "class_tolerance": report.class_tolerance,
            "cfl_safety": CFL_SAFETY,
            "resolved_relative": RESOLVED_TOL,
            "alpha_floor": ALPHA_FLOOR,
            "face_relative": FACE_TOL,
        }),
        config: serde_json::to_value(cfg).unwrap_or(Value::Null),
    };
    json!({ "provenance": provenance, "result": report.result })
}

/// Writes the report files into `dir`, returning their paths.
pub fn write_report(report: &Report, cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>, LabError> {
    let out_err = |path: &Path, e: &dyn std::fmt::Display| LabError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| out_err(dir, &e))?;
    let mut written = Vec::new();

    let csv_path = dir.join("report.csv");
    let bytes = report.table.to_csv().map_err(|e| out_err(&csv_path, &e))?;
    fs::write(&csv_path, bytes).map_err(|e| out_err(&csv_path, &e))?;
    written.push(csv_path);

    let json_path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report_json(report, cfg)).map_err(|e| out_err(&json_path, &e))?;
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| out_err(&json_path, &e))?;
    written.push(json_path);

    for (name, u) in &report.fields {
        let path = dir.join(format!("{name}.gf"));
        write_gridfn(u, &path).map_err(|e| out_err(&path, &e))?;
        written.push(path);
    }
    Ok(written)
}

/// Tolerance used by class checks: configured or the default for `u`.
pub fn class_tolerance(cfg: &ScenarioConfig, u: &GridFunction) -> f64 {
    cfg.analysis.tolerance.unwrap_or_else(|| default_tolerance(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_header_dot_decimals_and_newlines() {
        let mut t = Table::new(&["k", "value"]);
        t.push(vec!["0".into(), num(0.25)]);
        t.push(vec!["1".into(), num(1e-20)]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "k,value\n0,0.25\n1,1e-20\n");
        assert_eq!(t.column("value").unwrap(), vec!["0.25", "1e-20"]);
    }

    #[test]
    fn empty_table_still_has_a_header() {
        let t = Table::new(&["p", "alpha"]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "p,alpha\n");
    }

    #[test]
    fn fields_with_separators_are_quoted() {
        let mut t = Table::new(&["error"]);
        t.push(vec!["bad, really".into()]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "error\n\"bad, really\"\n");
    }
}
