//! Report JSON and the CSV files, with readers for everything written.
//!
//! CSV values carry 17 significant digits, enough to round-trip any `f64`.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use mismatch_relay::channels::{make_grid, GridSpec};
use mismatch_relay::prob::nats_to_bits;
use mismatch_relay::{BudgetStatus, SolverReport};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::Units;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn with_suffix(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_{suffix}"))
}

/// A rate in both units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub nats: f64,
    pub bits: f64,
}

impl Rate {
    pub fn from_nats(nats: f64) -> Self {
        Self {
            nats,
            bits: nats_to_bits(nats),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub target: Rate,
    pub status: BudgetStatus,
    pub probes: Vec<Probe>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub lambda: f64,
    pub rate_yz: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalResiduals {
    pub r_phi: f64,
    pub r_psi: f64,
    pub r_zeta: f64,
    pub r_mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub capacity: Rate,
    pub rate_yz: Rate,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub report_units: Units,
    pub final_residuals: Option<FinalResiduals>,
    pub budget: Option<BudgetSummary>,
}

impl RunReport {
    pub fn new(report: &SolverReport, units: Units) -> Self {
        Self {
            capacity: Rate::from_nats(report.capacity_lm),
            rate_yz: Rate::from_nats(report.rate_yz),
            lambda: report.lambda,
            iterations: report.iterations,
            converged: report.converged,
            seed: report.seed,
            report_units: units,
            final_residuals: report.final_residuals().map(|r| FinalResiduals {
                r_phi: r.phi,
                r_psi: r.psi,
                r_zeta: r.zeta,
                r_mu: r.mu,
            }),
            budget: report.budget.as_ref().map(|b| BudgetSummary {
                target: Rate::from_nats(b.target),
                status: b.status,
                probes: b
                    .probes
                    .iter()
                    .map(|&(lambda, rate)| Probe {
                        lambda,
                        rate_yz: Rate::from_nats(rate),
                    })
                    .collect(),
            }),
        }
    }

    /// Converged, and the budget met when one was requested.
    pub fn succeeded(&self) -> bool {
        self.converged && self.budget.as_ref().is_none_or(|b| b.status == BudgetStatus::Met)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub r_phi: f64,
    pub r_psi: f64,
    pub r_zeta: f64,
    pub r_mu: f64,
}

pub fn write_trace(path: &Path, report: &SolverReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iter", "objective", "r_phi", "r_psi", "r_zeta", "r_mu"])?;
    let t = &report.residual_traces;
    for (i, objective) in report.objective_trace.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            fmt_f64(*objective),
            fmt_f64(t.phi[i]),
            fmt_f64(t.psi[i]),
            fmt_f64(t.zeta[i]),
            fmt_f64(t.mu[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    reader(path)?
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("in {}", path.display()))
}

/// One sweep point. Failed points have `NaN` rates and the error in `note`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub capacity: f64,
    pub rate_yz: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub note: String,
}

pub fn write_sweep(path: &Path, axis: &str, units: Units, rows: &[SweepRow]) -> Result<()> {
    let mut w = writer(path)?;
    let u = units.suffix();
    w.write_record([
        axis.to_string(),
        format!("capacity_{u}"),
        format!("rate_yz_{u}"),
        "lambda".into(),
        "iterations".into(),
        "converged".into(),
        "note".into(),
    ])?;
    for r in rows {
        w.write_record([
            fmt_f64(r.value),
            fmt_f64(r.capacity),
            fmt_f64(r.rate_yz),
            fmt_f64(r.lambda),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.note.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = reader(path)?;
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let row: SweepRow = record
            .deserialize(None)
            .with_context(|| format!("{} data row {}", path.display(), line + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Writes a numeric matrix under a `c0,c1,...` header, preceded by `# ` comment lines.
pub fn write_matrix(path: &Path, matrix: &Array2<f64>, comments: &[String]) -> Result<()> {
    let mut file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    for c in comments {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record((0..matrix.ncols()).map(|j| format!("c{j}")))?;
    for row in matrix.rows() {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric matrix. Lines starting with `#` are skipped; a first row
/// with no numeric field is taken as a header.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (index, record) in r.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let parsed: Vec<Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if index == 0 && parsed.iter().all(|p| p.is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (col, (value, raw)) in parsed.into_iter().zip(record.iter()).enumerate() {
            let value = value.map_err(|_| {
                anyhow!(
                    "{}: row {}, column {}: cannot parse {raw:?} as a number",
                    path.display(),
                    index + 1,
                    col + 1
                )
            })?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                bail!(
                    "{}: row {} has {} columns, expected {}",
                    path.display(),
                    index + 1,
                    row.len(),
                    first.len()
                );
            }
        }
        rows.push(row);
    }
    let (m, n) = (rows.len(), rows.first().map_or(0, Vec::len));
    if m == 0 || n == 0 {
        bail!("{}: no numeric rows", path.display());
    }
    Ok(Array2::from_shape_vec((m, n), rows.into_iter().flatten().collect())?)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LegendRow {
    pub grid: String,
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

/// Index-to-coordinate legend for the relay (`y`) and output (`z`) grids.
pub fn write_legend(path: &Path, relay: &GridSpec, output: &GridSpec) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["grid", "index", "x", "y"])?;
    for (name, spec) in [("y", relay), ("z", output)] {
        let nodes = make_grid(spec)?;
        for (i, p) in nodes.points().expect("grid has points").iter().enumerate() {
            w.write_record([name.to_string(), i.to_string(), fmt_f64(p[0]), fmt_f64(p[1])])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_legend(path: &Path) -> Result<Vec<LegendRow>> {
    reader(path)?
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, -2.5e17, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }
}
