//! The published 270-scenario comparison table and its summary statistics.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ScenarioParams;

pub const REFERENCE_ROWS: usize = 270;

/// File name of the bundled table inside a data directory.
pub const REFERENCE_FILE: &str = "appendix_b.csv";

const BUNDLED: &str = include_str!("../../../data/appendix_b.csv");

pub const GRID_R_MS: [f64; 3] = [50.0, 100.0, 200.0];
pub const GRID_H_MS: [f64; 3] = [50.0, 100.0, 200.0];
/// A 12 B payload over a 1500 B MTU; printed as 0 in the published table.
pub const GRID_M: [f64; 6] = [0.008, 0.5, 1.0, 3.0, 5.0, 10.0];
pub const GRID_P: [f64; 5] = [0.95, 0.9, 0.85, 0.8, 0.75];

/// Published mean and standard deviation of the analytic-vs-measured errors.
pub const PUBLISHED_SUMMARY: ErrorSummary = ErrorSummary {
    mdr_mean: 0.91,
    mdr_std: 0.85,
    latency_mean_pct: 1.82,
    latency_std_pct: 2.40,
    jitter_mean_pct: 4.57,
    jitter_std_pct: 4.99,
};

/// All 270 parameter combinations in table order (r, h, m, p; p fastest, descending).
pub fn table_grid() -> Vec<ScenarioParams> {
    let mut out = Vec::with_capacity(REFERENCE_ROWS);
    for r in GRID_R_MS {
        for h in GRID_H_MS {
            for m in GRID_M {
                for p in GRID_P {
                    out.push(ScenarioParams::new(m, r, h, p).expect("grid values are valid"));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub idx: u32,
    pub r: f64,
    pub h: f64,
    pub m: f64,
    pub p: f64,
    pub mdr_a: f64,
    pub mdr_e: f64,
    pub mdr_err: f64,
    pub lat_a: f64,
    pub lat_e: f64,
    pub lat_err_pct: f64,
    pub jit_a: f64,
    pub jit_e: f64,
    pub jit_err_pct: f64,
}

impl ReferenceRow {
    pub fn params(&self) -> ScenarioParams {
        ScenarioParams::new(self.m, self.r, self.h, self.p).expect("reference rows are validated on load")
    }
}

fn on_grid(v: f64, grid: &[f64]) -> bool {
    grid.iter().any(|g| (g - v).abs() < 1e-9)
}

/// Parses the CSV table, checking row count, grid membership, unique
/// indices and full coverage of the grid.
pub fn parse_reference<R: Read>(reader: R) -> Result<Vec<ReferenceRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    let mut seen_idx = HashSet::new();
    let mut seen_params = HashSet::new();
    for rec in rdr.deserialize::<ReferenceRow>() {
        let rec = rec.map_err(|e| Error::Reference {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rows.len() as u64 + 2;
        let bad = |msg: String| Error::Reference { line, msg };
        if !on_grid(rec.r, &GRID_R_MS)
            || !on_grid(rec.h, &GRID_H_MS)
            || !on_grid(rec.m, &GRID_M)
            || !on_grid(rec.p, &GRID_P)
        {
            return Err(bad(format!(
                "parameters (r={}, h={}, m={}, p={}) are not on the reference grid",
                rec.r, rec.h, rec.m, rec.p
            )));
        }
        if !seen_idx.insert(rec.idx) {
            return Err(bad(format!("duplicate index {}", rec.idx)));
        }
        let key = [rec.r, rec.h, rec.m, rec.p].map(|v| (v * 1000.0).round() as i64);
        if !seen_params.insert(key) {
            return Err(bad("duplicate parameter combination".into()));
        }
        rows.push(rec);
    }
    if rows.len() != REFERENCE_ROWS {
        return Err(Error::RowCount {
            expected: REFERENCE_ROWS,
            found: rows.len(),
        });
    }
    Ok(rows)
}

pub fn load_reference(path: &Path) -> Result<Vec<ReferenceRow>> {
    parse_reference(std::fs::File::open(path)?)
}

/// The table shipped with the crate.
pub fn bundled_reference() -> Vec<ReferenceRow> {
    parse_reference(BUNDLED.as_bytes()).expect("bundled reference table is valid")
}

pub fn bundled_reference_csv() -> &'static str {
    BUNDLED
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub mdr_mean: f64,
    pub mdr_std: f64,
    pub latency_mean_pct: f64,
    pub latency_std_pct: f64,
    pub jitter_mean_pct: f64,
    pub jitter_std_pct: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

impl ErrorSummary {
    /// Mean and sample standard deviation of `(mdr, latency %, jitter %)`
    /// error triples.
    pub fn from_errors(errors: &[(f64, f64, f64)]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::Empty("no rows to summarize"));
        }
        let col = |f: fn(&(f64, f64, f64)) -> f64| errors.iter().map(f).collect::<Vec<_>>();
        let (mdr_mean, mdr_std) = mean_std(&col(|e| e.0));
        let (latency_mean_pct, latency_std_pct) = mean_std(&col(|e| e.1));
        let (jitter_mean_pct, jitter_std_pct) = mean_std(&col(|e| e.2));
        Ok(Self {
            mdr_mean,
            mdr_std,
            latency_mean_pct,
            latency_std_pct,
            jitter_mean_pct,
            jitter_std_pct,
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            self.mdr_mean - other.mdr_mean,
            self.mdr_std - other.mdr_std,
            self.latency_mean_pct - other.latency_mean_pct,
            self.latency_std_pct - other.latency_std_pct,
            self.jitter_mean_pct - other.jitter_mean_pct,
            self.jitter_std_pct - other.jitter_std_pct,
        ]
        .iter()
        .map(|d| d.abs())
        .fold(0.0, f64::max)
    }
}

/// Summary of the stored error columns.
pub fn summarize_errors(rows: &[ReferenceRow]) -> Result<ErrorSummary> {
    let errs: Vec<_> = rows
        .iter()
        .map(|r| (r.mdr_err, r.lat_err_pct, r.jit_err_pct))
        .collect();
    ErrorSummary::from_errors(&errs)
}
