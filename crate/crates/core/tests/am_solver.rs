mod common;

use mismatch_relay::am::{
    eval_f, eval_f_with_slope, eval_j, eval_log_j, eval_objective, rate_yz, update_omega, update_p, update_p_power,
    update_r,
};
use mismatch_relay::channels::Scheme;
use mismatch_relay::oracle::{finite_diff_check, scalar_reference_eval};
use mismatch_relay::prob::{entropy_of, mutual_information};
use mismatch_relay::{AmSolver, Channel, DecodingMetric, DualState, RelayProblem, SolverConfig, SolverState, Stage};
use ndarray::{array, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_state(rng: &mut ChaCha8Rng, problem: &RelayProblem) -> SolverState {
    let (m, n) = (problem.input_size(), problem.output_size());
    let mut state = SolverState::initial(problem, rng.random());
    state.p = common::dirichlet(rng, m);
    state.r = common::dirichlet(rng, n);
    state.dual = DualState::from_logs(
        Array1::from_shape_fn(m, |_| rng.random_range(-0.5..0.5)),
        Array1::from_shape_fn(n, |_| rng.random_range(-0.5..0.5)),
        rng.random_range(0.0..1.5),
    )
    .unwrap();
    state
}

fn assert_simplex(v: &[f64], what: &str) {
    assert!(v.iter().all(|x| *x >= 0.0), "{what} has a negative entry");
    let s: f64 = v.iter().sum();
    assert!((s - 1.0).abs() < 1e-12, "{what} sums to {s}");
}

#[test]
fn matches_scalar_reference() {
    let mut rng = common::rng(21);
    for _ in 0..100 {
        let problem = common::random_problem(&mut rng, 3, 3, 3, false);
        let state = random_state(&mut rng, &problem);
        let lambda = rng.random_range(0.1..2.0);
        let reference = scalar_reference_eval(&state, &problem, lambda);

        let j = eval_j(&state, &problem, lambda);
        for (a, b) in j.iter().zip(&reference.j) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "J {a} vs {b}");
        }
        let objective = eval_objective(&state, &problem, lambda);
        assert!((objective - reference.objective).abs() < 1e-12);

        let omega = update_omega(&state, &problem, lambda).unwrap();
        for (row, unnormalized) in omega.axis_iter(Axis(0)).zip(&reference.omega_star) {
            let s: f64 = unnormalized.iter().sum();
            for (a, b) in row.iter().zip(unnormalized) {
                assert!((a - b / s).abs() < 1e-12, "Ω {a} vs {}", b / s);
            }
        }
    }
}

#[test]
fn constant_j_gives_uniform_input() {
    // φ = 1, ψ̃ = 1, ζ = 0 and every row of Ω equal to r: ln J_i = −M for all i.
    let theta = Channel::from_matrix(array![[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.3, 0.3, 0.4]]).unwrap();
    let metric = DecodingMetric::new(array![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]]).unwrap();
    let problem = RelayProblem::new(theta, metric).unwrap();
    let r = array![0.25, 0.75];
    let omega = Array2::from_shape_fn((3, 2), |(_, j)| r[j]);
    let mut state = SolverState::with_omega(&problem, omega).unwrap();
    state.p = array![0.6, 0.3, 0.1];
    state.r = r;
    state.dual = DualState::from_logs(Array1::zeros(3), Array1::zeros(2), 0.0).unwrap();
    let log_j = eval_log_j(&state, &problem, 0.7);
    for l in &log_j {
        assert!((l + 3.0).abs() < 1e-14, "{l}");
    }
    let p = update_p(&state, &problem, 0.7).unwrap();
    for x in &p {
        assert!((x - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn update_r_pushes_forward() {
    let theta = Channel::from_matrix(array![[0.5, 0.5], [0.0, 1.0]]).unwrap();
    let metric = DecodingMetric::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
    let problem = RelayProblem::new(theta, metric).unwrap();
    let mut state = SolverState::with_omega(&problem, array![[0.9, 0.1], [0.2, 0.8]]).unwrap();
    state.p = array![0.4, 0.6];
    // q = (0.2, 0.8), r = (0.2·0.9 + 0.8·0.2, 0.2·0.1 + 0.8·0.8).
    let r = update_r(&state, &problem);
    assert!((r[0] - 0.34).abs() < 1e-15 && (r[1] - 0.66).abs() < 1e-15, "{r}");
}

#[test]
fn rate_yz_examples() {
    let mut rng = common::rng(22);
    let problem = common::random_problem(&mut rng, 3, 4, 4, false);
    let mut state = SolverState::with_omega(&problem, Array2::eye(4)).unwrap();
    state.p = common::dirichlet(&mut rng, 3);
    let q = state.relay_marginal(&problem);
    assert!((rate_yz(&state, &problem) - entropy_of(q.view())).abs() < 1e-14);

    let row = common::dirichlet(&mut rng, 4);
    state.omega = Array2::from_shape_fn((4, 4), |(_, j)| row[j]);
    assert!(rate_yz(&state, &problem).abs() < 1e-15);

    state.omega = common::stochastic(&mut rng, 4, 4);
    let mut joint = state.omega.clone();
    for (mut r, qk) in joint.axis_iter_mut(Axis(0)).zip(q.iter()) {
        r *= *qk;
    }
    assert!((rate_yz(&state, &problem) - mutual_information(&joint)).abs() < 1e-14);
}

#[test]
fn power_multiplier_matches_bisection() {
    let problem = common::awgn(Scheme::Qam16, 10.0, 49);
    let mut rng = common::rng(23);
    let gamma = 0.8;
    let mut checked = 0;
    for _ in 0..10 {
        let state = random_state(&mut rng, &problem);
        let log_j = eval_log_j(&state, &problem, 0.5);
        let powers = problem.symbol_powers().unwrap();
        let (p, mu) = update_p_power(&state, &problem, 0.5, gamma).unwrap();
        let power: f64 = p.iter().zip(&powers).map(|(a, b)| a * b).sum();
        assert!(power <= gamma + 1e-9);
        if eval_f(0.0, &log_j, &powers, gamma) <= 0.0 {
            assert_eq!(mu, 0.0);
            continue;
        }
        checked += 1;
        assert!((power - gamma).abs() < 1e-9, "{power}");
        let (mut lo, mut hi) = (0.0, 1.0);
        while eval_f(hi, &log_j, &powers, gamma) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if eval_f(mid, &log_j, &powers, gamma) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((mu - 0.5 * (lo + hi)).abs() < 1e-8, "{mu} vs {lo}");
    }
    assert!(checked > 0);
}

#[test]
fn power_slope_matches_finite_difference() {
    let problem = common::awgn(Scheme::Qam16, 10.0, 49);
    let mut rng = common::rng(24);
    let powers = problem.symbol_powers().unwrap();
    for _ in 0..10 {
        let state = random_state(&mut rng, &problem);
        let log_j = eval_log_j(&state, &problem, 0.5);
        let mu = rng.random_range(0.0..3.0);
        let (_, slope) = eval_f_with_slope(mu, &log_j, &powers, 1.0);
        let err = finite_diff_check(|x| eval_f(x, &log_j, &powers, 1.0), slope, mu, 1e-5);
        assert!(err < 1e-6, "{err}");
    }
}

#[test]
fn iterates_stay_on_the_simplex() {
    let mut rng = common::rng(25);
    for seed in 0..20 {
        let (m, k, n) = (rng.random_range(2..6), rng.random_range(2..6), rng.random_range(2..6));
        let problem = common::random_problem(&mut rng, m, k, n, false);
        let config = SolverConfig {
            lambda: 0.5,
            seed,
            ..SolverConfig::default()
        };
        let mut solver = AmSolver::new(&problem, &config).unwrap();
        for _ in 0..20 {
            for stage in Stage::ORDER {
                solver.step(stage).unwrap();
                let state = solver.state();
                assert_simplex(state.p.as_slice().unwrap(), "p");
                assert_simplex(state.r.as_slice().unwrap(), "r");
                for row in state.omega.axis_iter(Axis(0)) {
                    assert_simplex(row.as_slice().unwrap(), "Ω row");
                }
            }
        }
    }
}

#[test]
fn input_update_is_permutation_equivariant() {
    let mut rng = common::rng(26);
    for _ in 0..10 {
        let problem = common::random_problem(&mut rng, 4, 3, 3, false);
        let state = random_state(&mut rng, &problem);
        let perm = [2usize, 0, 3, 1];
        let theta = problem.theta().kernel().select(Axis(0), &perm);
        let costs = problem.metric().costs().select(Axis(0), &perm);
        let permuted = RelayProblem::new(
            Channel::from_matrix(theta).unwrap(),
            DecodingMetric::new(costs).unwrap(),
        )
        .unwrap();
        let mut moved = state.clone();
        moved.p = state.p.select(Axis(0), &perm);
        moved.dual = DualState::from_logs(
            state.dual.log_phi().select(Axis(0), &perm),
            state.dual.log_psi_tilde().clone(),
            state.dual.zeta(),
        )
        .unwrap();
        let p = update_p(&state, &problem, 0.4).unwrap();
        let q = update_p(&moved, &permuted, 0.4).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert!((q[new] - p[old]).abs() < 1e-14);
        }
    }
}
