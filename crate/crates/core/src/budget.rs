//! Multiplier search that meets a compression budget `I(Y;Z) = B`.

use crate::am::{solve, AmSolver, BudgetOutcome, BudgetStatus, RelayProblem, SolverConfig, SolverReport, SolverState};
use crate::error::{Error, Result};

/// Bracket expansions (by a factor of ten) allowed at each end.
const MAX_EXPANSIONS: usize = 4;
const MAX_BISECTIONS: usize = 200;

fn objective(report: &SolverReport) -> f64 {
    report.capacity_lm - report.lambda * report.rate_yz
}

struct Probe {
    lambda: f64,
    report: SolverReport,
}

/// Binary search on `λ` (geometric midpoints) so that the solution's `I(Y;Z)`
/// hits `config.compression_target` within `config.budget_tol`.
///
/// `I(Y;Z)` is assumed non-increasing in `λ`, which holds for global maximizers
/// but not for every local one. Each probe therefore runs the seeded starts of
/// [`solve`] and, once a lower bracket end exists, a warm start from that end's
/// final state; the run with the larger objective is kept. The search is
/// deterministic. Failures to meet the budget are reported in
/// [`SolverReport::budget`], not as errors.
pub fn solve_for_budget(problem: &RelayProblem, config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let target = config.compression_target.ok_or(Error::InvalidParameter {
        name: "compression_target",
        reason: "a budget search needs a target".into(),
    })?;
    let tol = config.budget_tol;
    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut run = |lambda: f64, warm: Option<&SolverState>| -> Result<Probe> {
        let mut c = config.clone();
        c.lambda = lambda;
        let mut report = solve(problem, &c)?;
        if let Some(state) = warm {
            let continued = AmSolver::with_state(problem, &c, state.clone())?.run()?;
            if objective(&continued) > objective(&report) {
                report = continued;
            }
        }
        probes.push((lambda, report.rate_yz));
        Ok(Probe { lambda, report })
    };
    let finish = |probe: Probe, status: BudgetStatus, probes: Vec<(f64, f64)>| {
        let mut report = probe.report;
        report.budget = Some(BudgetOutcome { target, status, probes });
        report
    };
    let met = |p: &Probe| (p.report.rate_yz - target).abs() <= tol;

    let (mut lo_lambda, mut hi_lambda) = config.lambda_bracket;
    let mut lo = run(lo_lambda, None)?;
    let mut expansions = 0;
    while !met(&lo) && lo.report.rate_yz < target && expansions < MAX_EXPANSIONS {
        lo_lambda /= 10.0;
        lo = run(lo_lambda, None)?;
        expansions += 1;
    }
    if met(&lo) {
        return Ok(finish(lo, BudgetStatus::Met, probes));
    }
    if lo.report.rate_yz < target {
        return Ok(finish(lo, BudgetStatus::Inactive, probes));
    }

    let mut hi = run(hi_lambda, Some(&lo.report.final_state))?;
    expansions = 0;
    while !met(&hi) && hi.report.rate_yz > target && expansions < MAX_EXPANSIONS {
        hi_lambda *= 10.0;
        hi = run(hi_lambda, Some(&lo.report.final_state))?;
        expansions += 1;
    }
    if met(&hi) {
        return Ok(finish(hi, BudgetStatus::Met, probes));
    }
    if hi.report.rate_yz > target {
        return Ok(finish(hi, BudgetStatus::BracketFailure, probes));
    }

    let mut monotone = true;
    for _ in 0..MAX_BISECTIONS {
        let mid_lambda = (lo.lambda * hi.lambda).sqrt();
        if !(mid_lambda > lo.lambda && mid_lambda < hi.lambda) {
            break;
        }
        let mid = run(mid_lambda, Some(&lo.report.final_state))?;
        if met(&mid) {
            let status = if monotone {
                BudgetStatus::Met
            } else {
                BudgetStatus::NotMonotone
            };
            return Ok(finish(mid, status, probes));
        }
        let rate = mid.report.rate_yz;
        if rate > lo.report.rate_yz || rate < hi.report.rate_yz {
            monotone = false;
        }
        if rate > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let closer = if (lo.report.rate_yz - target).abs() <= (hi.report.rate_yz - target).abs() {
        lo
    } else {
        hi
    };
    let status = if monotone {
        BudgetStatus::Unresolved
    } else {
        BudgetStatus::NotMonotone
    };
    Ok(finish(closer, status, probes))
}
