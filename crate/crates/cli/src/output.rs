use std::fs;
use std::path::Path;

use serde::Serialize;
use stap_core::experiments::{ExperimentParams, Outcome, Scenario};

use crate::CliError;

/// Renders like C's `%.9g`.
pub fn format_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{:.*}", (8 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_g(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Writes a header plus rows; refuses empty tables without touching `path`.
pub fn write_csv(table: &Table, path: &Path) -> Result<(), CliError> {
    if table.rows.is_empty() {
        return Err(CliError::Validation("refusing to write an empty table".into()));
    }
    let bytes = table.to_csv_bytes()?;
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn evolve_table(o: &Outcome) -> Table {
    let mut t = Table::new(&["t", "fidelity", "pop_chi", "pop_varpi", "trace", "norm"]);
    for r in &o.run.records {
        let pop = |l: &str| r.population(l).unwrap_or(f64::NAN);
        t.push(vec![
            Cell::Num(r.t),
            Cell::Num(r.fidelity),
            Cell::Num(pop("chi")),
            Cell::Num(pop("varpi")),
            Cell::Num(r.trace),
            Cell::Num(r.norm),
        ]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: Scenario,
    pub params: ExperimentParams,
    pub fidelity_final: Option<f64>,
    pub error_estimate: Option<f64>,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn from_outcome(o: &Outcome) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        Self {
            scenario: o.scenario,
            params: o.params,
            fidelity_final: finite(o.fidelity()),
            error_estimate: finite(o.run.error_estimate),
            warnings: o.warnings.clone(),
        }
    }
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(summary).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
