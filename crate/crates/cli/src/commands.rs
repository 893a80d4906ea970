//! The four subcommands. Each returns the process exit code.

use std::path::Path;

use anyhow::{bail, Result};
use mismatch_relay::{lm_rate_fixed_joint, solve, solve_for_budget, DecodingMetric, SolverReport};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{self, with_suffix, RunReport, SweepRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

fn exit_code(success: bool) -> i32 {
    if success {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}

/// Solves the configured problem in its mode.
pub fn execute(config: &RunConfig) -> Result<SolverReport> {
    let problem = config.problem()?;
    let solver = config.solver_config();
    let report = if solver.compression_target.is_some() {
        solve_for_budget(&problem, &solver)?
    } else {
        solve(&problem, &solver)?
    };
    Ok(report)
}

/// Writes `<prefix>_report.json` and `<prefix>_trace.csv`.
pub fn run(config: &RunConfig) -> Result<i32> {
    let report = execute(config)?;
    let summary = RunReport::new(&report, config.report_units);
    summary.write(&with_suffix(config.prefix(), "report.json"))?;
    output::write_trace(&with_suffix(config.prefix(), "trace.csv"), &report)?;
    Ok(exit_code(summary.succeeded()))
}

/// Writes `<prefix>_sweep.csv`, one row per value, in the order given.
pub fn sweep(config: &RunConfig, workers: usize) -> Result<i32> {
    let Some(spec) = &config.sweep else {
        bail!("sweep needs a `sweep` section with `axis` and `values`");
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let units = config.report_units;
    let rows: Vec<SweepRow> = pool.install(|| {
        spec.values
            .par_iter()
            .map(|&value| {
                let point = config.at(spec.axis, value);
                let outcome = point.validate().and_then(|_| execute(&point));
                match outcome {
                    Ok(report) => {
                        let summary = RunReport::new(&report, units);
                        SweepRow {
                            value,
                            capacity: units.from_nats(report.capacity_lm),
                            rate_yz: units.from_nats(report.rate_yz),
                            lambda: report.lambda,
                            iterations: report.iterations,
                            converged: summary.succeeded(),
                            note: summary
                                .budget
                                .map(|b| format!("{:?}", b.status).to_lowercase())
                                .unwrap_or_default(),
                        }
                    }
                    Err(e) => SweepRow {
                        value,
                        capacity: f64::NAN,
                        rate_yz: f64::NAN,
                        lambda: f64::NAN,
                        iterations: 0,
                        converged: false,
                        note: format!("{e:#}"),
                    },
                }
            })
            .collect()
    });
    output::write_sweep(
        &with_suffix(config.prefix(), "sweep.csv"),
        spec.axis.name(),
        units,
        &rows,
    )?;
    Ok(exit_code(rows.iter().all(|r| r.converged)))
}

/// Writes the converged quantizer to `<prefix>_quantizer.csv` and the grid
/// coordinates to `<prefix>_legend.csv`.
pub fn export_quantizer(config: &RunConfig) -> Result<i32> {
    let Some(grid) = config.grid()? else {
        bail!("export-quantizer needs an awgn_iq channel");
    };
    let report = execute(config)?;
    let summary = RunReport::new(&report, config.report_units);
    let mut comments = Vec::new();
    if !summary.succeeded() {
        comments.push(format!("not converged after {} iterations", report.iterations));
    }
    output::write_matrix(
        &with_suffix(config.prefix(), "quantizer.csv"),
        &report.final_state.omega,
        &comments,
    )?;
    output::write_legend(&with_suffix(config.prefix(), "legend.csv"), &grid, &grid)?;
    summary.write(&with_suffix(config.prefix(), "report.json"))?;
    Ok(exit_code(summary.succeeded()))
}

/// LM rate of a fixed joint under a metric, both read from CSV.
pub fn lm_rate(joint: &Path, metric: &Path, units: crate::config::Units) -> Result<f64> {
    let joint = output::read_matrix(joint)?;
    let metric = output::read_matrix(metric)?;
    if joint.dim() != metric.dim() {
        bail!("joint is {:?} but metric is {:?}", joint.dim(), metric.dim());
    }
    let metric = DecodingMetric::new(metric)?;
    let rate = lm_rate_fixed_joint(&joint, &metric, 1e-12, 100_000)?;
    Ok(units.from_nats(rate.value))
}
