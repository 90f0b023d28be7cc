use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::plot::Plot;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    /// Fixed scientific format so reruns produce identical bytes.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.15e}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// One audited inequality between `lhs` and `rhs`, accepted within `tol`.
/// `margin` is positive when the inequality holds strictly.
#[derive(Debug, Clone, Serialize)]
pub struct Audit {
    pub bound: String,
    pub h: Option<f64>,
    pub lhs: f64,
    pub relation: &'static str,
    pub rhs: f64,
    pub tol: f64,
    pub margin: f64,
    pub pass: bool,
}

impl Audit {
    /// `lhs ≤ rhs + tol`.
    pub fn le(bound: impl Into<String>, h: Option<f64>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Audit {
            bound: bound.into(),
            h,
            lhs,
            relation: "<=",
            rhs,
            tol,
            margin: rhs - lhs,
            pass: lhs <= rhs + tol,
        }
    }

    /// `lhs ≥ rhs − tol`.
    pub fn ge(bound: impl Into<String>, h: Option<f64>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Audit {
            bound: bound.into(),
            h,
            lhs,
            relation: ">=",
            rhs,
            tol,
            margin: lhs - rhs,
            pass: lhs >= rhs - tol,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Experiment-specific summary merged into `report.json`.
    pub summary: Value,
    pub audits: Vec<Audit>,
    pub plot: Plot,
}

impl Report {
    pub fn failures(&self) -> Vec<&Audit> {
        self.audits.iter().filter(|a| !a.pass).collect()
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Writes `report.csv`, `report.json`, and `plot.svg` into `dir`.
    pub fn write(&self, dir: &Path, header: Value) -> Result<()> {
        fs::write(dir.join("report.csv"), self.csv_string()?)?;
        let doc = json!({
            "meta": header,
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(|c| match c {
                Cell::Num(v) => json!(v),
                Cell::Text(s) => json!(s),
                Cell::Empty => Value::Null,
            }).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "summary": self.summary,
            "audits": self.audits,
            "all_audits_pass": self.failures().is_empty(),
        });
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
        fs::write(dir.join("plot.svg"), self.plot.render())?;
        Ok(())
    }
}
