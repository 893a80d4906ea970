//! Acceptance criteria, one test each. Run with `--nocapture` to see the
//! PASS/FAIL lines.

mod common;

use std::time::{Duration, Instant};

use mismatch_relay::am::{eval_objective, eval_objective_dual_form};
use mismatch_relay::channels::Scheme;
use mismatch_relay::oracle::{default_step, lm_rate_bruteforce};
use mismatch_relay::prob::{bits_to_nats, mutual_information, nats_to_bits};
use mismatch_relay::{
    lm_rate_fixed_joint, solve, solve_for_budget, AmSolver, BudgetStatus, InputMode, RelayProblem, SolverConfig,
    SolverReport, Stage,
};
use rand::Rng;

fn verdict(criterion: u32, title: &str, pass: bool, detail: String) {
    let word = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion} [{word}] {title}: {detail}");
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn budget_run(problem: &RelayProblem, bits: f64, input: InputMode) -> SolverReport {
    let config = SolverConfig {
        compression_target: Some(bits_to_nats(bits)),
        input,
        ..SolverConfig::default()
    };
    solve_for_budget(problem, &config).unwrap()
}

/// Largest violation of `0 <= C <= I(X;Z) <= I(X;Y)` (slack 1e-9) on a converged run.
fn bound_violation(problem: &RelayProblem, report: &SolverReport) -> f64 {
    let state = &report.final_state;
    let i_xz = mutual_information(&state.joint_xz(problem));
    let i_xy = mutual_information(&common::joint_xy(&state.p, problem.theta().kernel()));
    [
        -report.capacity_lm - 1e-9,
        report.capacity_lm - i_xz - 1e-9,
        i_xz - i_xy - 1e-9,
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

#[test]
fn criterion_1_compression_feasibility() {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    let mut statuses = Vec::new();
    for epsilon in [0.3, 0.4] {
        let problem = common::quaternary(epsilon);
        for bits in [0.41, 0.81] {
            let start = Instant::now();
            let report = budget_run(&problem, bits, InputMode::Uniform);
            slowest = slowest.max(start.elapsed());
            worst = worst.max((report.rate_yz - bits_to_nats(bits)).abs());
            statuses.push(report.budget.unwrap().status);
        }
    }
    let pass = worst <= 1e-6 && slowest < Duration::from_secs(60) && statuses.iter().all(|s| *s == BudgetStatus::Met);
    verdict(
        1,
        "compression feasibility",
        pass,
        format!("max |I(Y;Z) - B| = {worst:.3e} nats, slowest case {slowest:.2?}"),
    );
}

#[test]
fn criterion_2_monotone_ascent() {
    let mut worst_drop: f64 = 0.0;
    let mut updates = 0usize;
    for seed in 0..100u64 {
        let mut rng = common::rng(1000 + seed);
        let (m, k, n) = (
            rng.random_range(2..=8),
            rng.random_range(2..=8),
            rng.random_range(2..=8),
        );
        let powered = seed % 4 == 0;
        let problem = common::random_problem(&mut rng, m, k, n, powered);
        let mut config = SolverConfig {
            lambda: rng.random_range(0.05..2.0),
            seed,
            ..SolverConfig::default()
        };
        if powered {
            let powers = problem.symbol_powers().unwrap();
            let mean = powers.iter().sum::<f64>() / m as f64;
            let min = powers.iter().copied().fold(f64::INFINITY, f64::min);
            config.power_limit = Some(min + 0.7 * (mean - min));
        }
        let mut solver = AmSolver::new(&problem, &config).unwrap();
        let mut previous = solver.objective();
        for iteration in 0..40 {
            for stage in Stage::ORDER {
                solver.step(stage).unwrap();
                let current = solver.objective();
                // Under a power limit the first input update moves p onto the feasible set.
                if !(powered && iteration == 0 && stage == Stage::Input) {
                    worst_drop = worst_drop.max(previous - current);
                }
                previous = current;
                updates += 1;
            }
        }
    }
    verdict(
        2,
        "monotone ascent",
        worst_drop <= 1e-9,
        format!("largest objective decrease {worst_drop:.3e} over {updates} updates on 100 instances"),
    );
}

#[test]
fn criterion_3_oracle_equivalence() {
    let mut worst_gap: f64 = 0.0;
    let mut worst_duality: f64 = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let mut rng = common::rng(2000 + seed);
        let n = if seed < 10 { 2 } else { 3 };
        let joint = common::stochastic(&mut rng, 1, 2 * n)
            .into_shape_with_order((2, n))
            .unwrap();
        let metric = common::metric(&mut rng, 2, n, 2.0);
        let dual = lm_rate_fixed_joint(&joint, &metric, 1e-12, 20_000).unwrap();
        let primal = lm_rate_bruteforce(&joint, &metric, default_step(2, n)).unwrap();
        worst_gap = worst_gap.max((dual.value - primal).abs());
        for g in &dual.trace {
            worst_duality = worst_duality.max(g - primal);
        }
    }
    verdict(
        3,
        "oracle equivalence",
        worst_gap <= 1e-3 && worst_duality <= 1e-6,
        format!(
            "max |dual - brute force| = {worst_gap:.3e} nats, max (dual iterate - brute force) = {worst_duality:.3e}"
        ),
    );
}

fn residual_convergence(n_points: usize) -> (bool, String) {
    let problem = common::awgn(Scheme::Qpsk, 10.0, n_points);
    let config = SolverConfig {
        lambda: 0.25,
        residual_tol: 1e-5,
        max_iter: 5000,
        ..SolverConfig::default()
    };
    let report = solve(&problem, &config).unwrap();
    let last = report.final_residuals().unwrap();
    let pass = report.converged && report.iterations <= 5000 && last.max() < 1e-5;
    (
        pass,
        format!(
            "N={n_points}: {} iterations, residuals phi {:.2e} psi {:.2e} zeta {:.2e} mu {:.2e}, C = {:.6} bits",
            report.iterations,
            last.phi,
            last.psi,
            last.zeta,
            last.mu,
            nats_to_bits(report.capacity_lm)
        ),
    )
}

#[test]
fn criterion_4_residual_convergence() {
    let (pass, detail) = residual_convergence(225);
    verdict(4, "residual convergence", pass, detail);
}

#[test]
#[ignore = "2500-point grid, several minutes"]
fn criterion_4_residual_convergence_full_grid() {
    let start = Instant::now();
    let (pass, detail) = residual_convergence(2500);
    let elapsed = start.elapsed();
    verdict(
        4,
        "residual convergence (N=2500)",
        pass && elapsed < Duration::from_secs(1800),
        format!("{detail}, {elapsed:.1?}"),
    );
}

fn non_increasing(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn criterion_5_trends() {
    let epsilons = [0.1, 0.2, 0.3, 0.4];
    let by_epsilon: Vec<f64> = epsilons
        .iter()
        .map(|&e| budget_run(&common::quaternary(e), 1.0, InputMode::Optimize).capacity_lm)
        .collect();

    let budgets = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0];
    let problem = common::quaternary(0.3);
    let by_budget: Vec<f64> = budgets
        .iter()
        .map(|&b| budget_run(&problem, b, InputMode::Optimize).capacity_lm)
        .collect();
    let neg_budget: Vec<f64> = by_budget.iter().map(|c| -c).collect();

    let by_snr: Vec<f64> = [5.0, 10.0]
        .iter()
        .map(|&snr| {
            let problem = common::awgn(Scheme::Qpsk, snr, 121);
            let config = SolverConfig {
                compression_target: Some(bits_to_nats(0.5)),
                residual_tol: 1e-7,
                ..SolverConfig::default()
            };
            let report = solve_for_budget(&problem, &config).unwrap();
            let met = matches!(report.budget.as_ref().map(|b| b.status), Some(BudgetStatus::Met));
            if met {
                report.capacity_lm
            } else {
                f64::NAN
            }
        })
        .collect();

    let rise_in_epsilon = non_increasing(&by_epsilon);
    let drop_in_budget = non_increasing(&neg_budget);
    let drop_in_snr = by_snr[0] - by_snr[1];
    let bits = |v: &[f64]| {
        v.iter()
            .map(|c| format!("{:.4}", nats_to_bits(*c)))
            .collect::<Vec<_>>()
            .join(", ")
    };
    verdict(
        5,
        "trend reproduction",
        rise_in_epsilon <= 1e-6
            && drop_in_budget <= 1e-6
            && drop_in_snr <= 1e-6
            && by_snr.iter().all(|c| c.is_finite()),
        format!(
            "C(eps) = [{}], C(B) = [{}], C(SNR 5, 10 dB) = [{}] bits",
            bits(&by_epsilon),
            bits(&by_budget),
            bits(&by_snr)
        ),
    );
}

#[test]
fn criterion_6_noiseless_sanity() {
    let problem = common::quaternary(0.0);
    let mut worst: f64 = 0.0;
    let mut values = Vec::new();
    for bits in [2.0, 2.5, 3.0] {
        let report = budget_run(&problem, bits, InputMode::Uniform);
        let c = nats_to_bits(report.capacity_lm);
        worst = worst.max((c - 2.0).abs());
        values.push(format!("B={bits}: {c:.9}"));
    }
    verdict(
        6,
        "noiseless sanity",
        worst <= 1e-3,
        format!("{} bits, max deviation {worst:.3e}", values.join(", ")),
    );
}

#[test]
fn criterion_7_bounds_at_convergence() {
    let mut reports: Vec<(RelayProblem, SolverReport)> = Vec::new();
    for epsilon in [0.1, 0.3, 0.4] {
        let problem = common::quaternary(epsilon);
        for lambda in [0.1, 0.5, 1.0] {
            let config = SolverConfig {
                lambda,
                residual_tol: 1e-11,
                ..SolverConfig::default()
            };
            let report = solve(&problem, &config).unwrap();
            reports.push((problem.clone(), report));
        }
        let report = budget_run(&problem, 0.81, InputMode::Uniform);
        reports.push((problem, report));
    }
    for seed in 0..20u64 {
        let mut rng = common::rng(3000 + seed);
        let (m, k, n) = (
            rng.random_range(2..=6),
            rng.random_range(2..=6),
            rng.random_range(2..=6),
        );
        let problem = common::random_problem(&mut rng, m, k, n, false);
        let config = SolverConfig {
            lambda: rng.random_range(0.1..1.0),
            seed,
            residual_tol: 1e-11,
            ..SolverConfig::default()
        };
        let report = solve(&problem, &config).unwrap();
        reports.push((problem, report));
    }
    let qpsk = common::awgn(Scheme::Qpsk, 10.0, 225);
    let config = SolverConfig {
        residual_tol: 1e-5,
        ..SolverConfig::default()
    };
    let report = solve(&qpsk, &config).unwrap();
    reports.push((qpsk, report));

    let converged: Vec<_> = reports.iter().filter(|(_, r)| r.converged).collect();
    let worst = converged.iter().map(|(p, r)| bound_violation(p, r)).fold(0.0, f64::max);
    verdict(
        7,
        "bounds at convergence",
        worst == 0.0 && converged.len() * 2 > reports.len(),
        format!(
            "{} of {} runs converged, largest violation {worst:.3e}",
            converged.len(),
            reports.len()
        ),
    );
}

#[test]
fn criterion_8_power_constraint() {
    let qam = common::awgn(Scheme::Qam16, 10.0, 225);
    let powers = qam.symbol_powers().unwrap();
    let config = SolverConfig {
        power_limit: Some(1.0),
        ..SolverConfig::default()
    };
    let mut solver = AmSolver::new(&qam, &config).unwrap();
    let mean_power = |p: &ndarray::Array1<f64>| p.iter().zip(&powers).map(|(p, x)| p * x).sum::<f64>();
    let mut worst_power = mean_power(&solver.state().p);
    for _ in 0..300 {
        solver.iterate().unwrap();
        worst_power = worst_power.max(mean_power(&solver.state().p));
    }

    let qpsk = common::awgn(Scheme::Qpsk, 10.0, 225);
    let mut solver = AmSolver::new(&qpsk, &config).unwrap();
    let mut mu_trace = Vec::new();
    for _ in 0..300 {
        solver.iterate().unwrap();
        mu_trace.push(solver.state().mu);
    }
    let qpsk_mu_zero = mu_trace.iter().all(|mu| *mu == 0.0);
    verdict(
        8,
        "power constraint",
        worst_power <= 1.0 + 1e-8 && qpsk_mu_zero,
        format!(
            "16QAM max E[|x|^2] = {worst_power:.12}, QPSK mu identically zero over {} iterations: {qpsk_mu_zero}",
            mu_trace.len()
        ),
    );
}

#[test]
fn criterion_9_cross_form_consistency() {
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut check = |problem: &RelayProblem, config: &SolverConfig, iterations: usize| {
        let mut solver = AmSolver::new(problem, config).unwrap();
        for _ in 0..iterations {
            solver.iterate().unwrap();
            let state = solver.state();
            let j_form = eval_objective(state, problem, config.lambda);
            let dual_form = eval_objective_dual_form(state, problem, config.lambda).unwrap();
            worst = worst.max((j_form - dual_form).abs());
            checked += 1;
        }
    };
    for seed in 0..100u64 {
        let mut rng = common::rng(1000 + seed);
        let (m, k, n) = (
            rng.random_range(2..=8),
            rng.random_range(2..=8),
            rng.random_range(2..=8),
        );
        let problem = common::random_problem(&mut rng, m, k, n, false);
        let config = SolverConfig {
            lambda: rng.random_range(0.05..2.0),
            seed,
            ..SolverConfig::default()
        };
        check(&problem, &config, 40);
    }
    for epsilon in [0.0, 0.3, 0.4] {
        let config = SolverConfig {
            input: InputMode::Uniform,
            ..SolverConfig::default()
        };
        check(&common::quaternary(epsilon), &config, 200);
    }
    check(&common::awgn(Scheme::Qpsk, 10.0, 225), &SolverConfig::default(), 300);
    let powered = SolverConfig {
        power_limit: Some(1.0),
        ..SolverConfig::default()
    };
    check(&common::awgn(Scheme::Qam16, 10.0, 225), &powered, 100);
    verdict(
        9,
        "cross-form consistency",
        worst <= 1e-9,
        format!("max |J form - dual form| = {worst:.3e} over {checked} iterates"),
    );
}
