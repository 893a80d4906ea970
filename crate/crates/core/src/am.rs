//! Alternating maximization over the input law, the relay quantizer and the
//! LM dual potentials.
//!
//! The relaxed problem maximizes `I_LM(X;Z) − λ I(Y;Z)` over `p = P_X` and
//! `Ω = P_{Z|Y}`. With the LM rate replaced by its dual and the change of
//! variables `ψ̃ = ψ ./ (Ωᵀ Θᵀ p)`, the objective becomes
//!
//! ```text
//! −pᵀ ln p + pᵀ ln J(φ, ψ̃, ζ; Ω, r) + 1
//! ```
//!
//! which is concave in each block separately and has a closed-form maximizer
//! in every block except `ζ` (and `μ` under a power limit), which are scalar
//! roots. One iteration updates `p, Ω, r, φ, ψ̃, ζ` in that order.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm_dual::{
    self, column_log_mass, eval_g_lm, phi_residual, psi_residual, solve_zeta, zeta_residual, DualState, LmMarginals,
};
use crate::numeric::{flush_subnormals, ln_floor, softmax_in_place, xln_ratio, xlnx};
use crate::prob::{Channel, DecodingMetric};
use crate::root::{decreasing_root, RootSearch};

/// Upper end of the bracket expansion for the power multiplier.
pub const MU_LIMIT: f64 = 1e6;

/// Channel `Θ` from the sender to the relay together with the decoder's metric.
#[derive(Debug, Clone)]
pub struct RelayProblem {
    theta: Channel,
    metric: DecodingMetric,
}

impl RelayProblem {
    pub fn new(theta: Channel, metric: DecodingMetric) -> Result<Self> {
        if metric.dim().0 != theta.input_size() {
            return Err(Error::DimensionMismatch {
                context: "metric rows vs channel input alphabet",
                expected: theta.input_size(),
                found: metric.dim().0,
            });
        }
        Ok(Self { theta, metric })
    }

    pub fn theta(&self) -> &Channel {
        &self.theta
    }

    pub fn metric(&self) -> &DecodingMetric {
        &self.metric
    }

    /// `M`, the number of input symbols.
    pub fn input_size(&self) -> usize {
        self.theta.input_size()
    }

    /// `K`, the number of relay observations.
    pub fn relay_size(&self) -> usize {
        self.theta.output_size()
    }

    /// `N`, the number of reproduction symbols.
    pub fn output_size(&self) -> usize {
        self.metric.dim().1
    }

    /// `‖x_i‖²` for every input point, if the input alphabet is embedded.
    pub fn symbol_powers(&self) -> Option<Vec<f64>> {
        self.theta.input().powers()
    }
}

/// How the input distribution is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// `p` is optimized.
    #[default]
    Optimize,
    /// `p` stays uniform; the result is an achievable rate for that input.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Fixed multiplier on `I(Y;Z)`.
    pub lambda: f64,
    pub max_iter: usize,
    pub residual_tol: f64,
    /// Average power limit `Γ` on the input constellation.
    pub power_limit: Option<f64>,
    /// Compression budget `B` in nats, used by [`crate::solve_for_budget`].
    pub compression_target: Option<f64>,
    pub lambda_bracket: (f64, f64),
    /// Allowed `|I(Y;Z) − B|` in nats.
    pub budget_tol: f64,
    pub seed: u64,
    /// Independent random starts; the best final objective wins.
    pub restarts: usize,
    pub input: InputMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.25,
            max_iter: 5000,
            residual_tol: 1e-8,
            power_limit: None,
            compression_target: None,
            lambda_bracket: (1e-3, 10.0),
            budget_tol: 1e-6,
            seed: 0,
            restarts: 1,
            input: InputMode::Optimize,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: String) -> Error {
            Error::InvalidParameter { name, reason }
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(bad("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if self.max_iter == 0 {
            return Err(bad("max_iter", "must be at least 1".into()));
        }
        if !(self.residual_tol > 0.0) {
            return Err(bad(
                "residual_tol",
                format!("must be positive, got {}", self.residual_tol),
            ));
        }
        if let Some(g) = self.power_limit {
            if !(g.is_finite() && g > 0.0) {
                return Err(bad("power_limit", format!("must be positive, got {g}")));
            }
        }
        if let Some(b) = self.compression_target {
            if !(b.is_finite() && b >= 0.0) {
                return Err(bad("compression_target", format!("must be non-negative, got {b}")));
            }
        }
        let (lo, hi) = self.lambda_bracket;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(bad(
                "lambda_bracket",
                format!("must satisfy 0 < lo < hi, got ({lo}, {hi})"),
            ));
        }
        if !(self.budget_tol > 0.0) {
            return Err(bad("budget_tol", format!("must be positive, got {}", self.budget_tol)));
        }
        if self.restarts == 0 {
            return Err(bad("restarts", "must be at least 1".into()));
        }
        Ok(())
    }
}

/// Every iterate of the alternating maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Input distribution `p`.
    pub p: Array1<f64>,
    /// Relay quantizer `Ω`, `K × N`, row-stochastic.
    pub omega: Array2<f64>,
    /// Auxiliary output marginal `r`; equals `Ωᵀ Θᵀ p` after the `r` update.
    pub r: Array1<f64>,
    pub dual: DualState,
    /// Power multiplier.
    pub mu: f64,
}

impl SolverState {
    /// Uniform `p`, Dirichlet(1) rows of `Ω` drawn from `seed`, consistent `r`,
    /// `φ = 1`, `ψ̃ = 1`, `ζ = 1`, `μ = 1`.
    pub fn initial(problem: &RelayProblem, seed: u64) -> Self {
        let (k, n) = (problem.relay_size(), problem.output_size());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut omega = Array2::from_shape_fn((k, n), |_| rng.sample::<f64, _>(Exp1));
        for mut row in omega.axis_iter_mut(Axis(0)) {
            let s = row.sum();
            row /= s;
        }
        Self::with_omega(problem, omega).expect("random quantizer has the problem's shape")
    }

    /// Starts from a caller-supplied quantizer with uniform `p`.
    pub fn with_omega(problem: &RelayProblem, omega: Array2<f64>) -> Result<Self> {
        let (m, k, n) = (problem.input_size(), problem.relay_size(), problem.output_size());
        if omega.dim() != (k, n) {
            return Err(Error::DimensionMismatch {
                context: "initial quantizer rows",
                expected: k,
                found: omega.nrows(),
            });
        }
        Channel::from_matrix(omega.clone())?;
        let p = Array1::from_elem(m, 1.0 / m as f64);
        let mut state = Self {
            p,
            omega,
            r: Array1::zeros(n),
            dual: DualState::initial(m, n),
            mu: 1.0,
        };
        state.r = update_r(&state, problem);
        Ok(state)
    }

    /// `Ω` as a validated channel.
    pub fn omega_channel(&self) -> Result<Channel> {
        Channel::from_matrix(self.omega.clone())
    }

    /// `q = Θᵀ p`, the relay's observation law.
    pub fn relay_marginal(&self, problem: &RelayProblem) -> Array1<f64> {
        problem.theta.kernel().t().dot(&self.p)
    }

    /// `s = Ωᵀ Θᵀ p`, the true output law.
    pub fn output_marginal(&self, problem: &RelayProblem) -> Array1<f64> {
        self.omega.t().dot(&self.relay_marginal(problem))
    }

    /// `P_XZ = Diag(p) Θ Ω`.
    pub fn joint_xz(&self, problem: &RelayProblem) -> Array2<f64> {
        let mut joint = problem.theta.kernel().dot(&self.omega);
        for (mut row, pi) in joint.axis_iter_mut(Axis(0)).zip(self.p.iter()) {
            row *= *pi;
        }
        joint
    }

    /// Marginals of `P_XZ` as seen by the LM dual.
    pub fn lm_marginals(&self, problem: &RelayProblem) -> LmMarginals {
        let joint = self.joint_xz(problem);
        LmMarginals {
            x: self.p.clone(),
            z: joint.sum_axis(Axis(0)),
            expected_cost: problem.metric.expectation(joint.view()),
        }
    }
}

/// `ln J`, the log-coefficients of `p` in the objective.
///
/// ```text
/// ln J = ln φ + (ΘΩ)[−(Λᵀφ) ⊙ ψ̃ + ln ψ̃] − ζ [(ΘΩ) ⊙ D] 1 − λ Θ [Ω ⊙ (ln Ω − ln 1 rᵀ)] 1
/// ```
pub fn eval_log_j(state: &SolverState, problem: &RelayProblem, lambda: f64) -> Array1<f64> {
    log_j_with(state, problem, lambda, &OmegaTerms::new(state, problem))
}

/// The parts of the objective that change only with `Ω`.
#[derive(Debug, Clone)]
struct OmegaTerms {
    /// `ΘΩ`, `M × N`.
    reach: Array2<f64>,
    /// `Σ_j Ω_kj ln Ω_kj` per relay symbol.
    neg_entropy: Array1<f64>,
}

impl OmegaTerms {
    fn new(state: &SolverState, problem: &RelayProblem) -> Self {
        let neg_entropy = state
            .omega
            .axis_iter(Axis(0))
            .map(|row| row.iter().map(|w| xlnx(*w)).sum())
            .collect();
        Self::with_entropy(state, problem, neg_entropy)
    }

    fn with_entropy(state: &SolverState, problem: &RelayProblem, neg_entropy: Array1<f64>) -> Self {
        Self {
            reach: problem.theta.kernel().dot(&state.omega),
            neg_entropy,
        }
    }

    fn marginals(&self, p: &Array1<f64>, metric: &DecodingMetric) -> LmMarginals {
        let costs = metric.costs();
        let mut z = Array1::zeros(self.reach.ncols());
        let mut expected_cost = 0.0;
        for ((row, d), pi) in self
            .reach
            .axis_iter(Axis(0))
            .zip(costs.axis_iter(Axis(0)))
            .zip(p.iter())
        {
            if *pi == 0.0 {
                continue;
            }
            z.scaled_add(*pi, &row);
            expected_cost += pi * row.iter().zip(d.iter()).map(|(a, d)| a * d).sum::<f64>();
        }
        LmMarginals {
            x: p.clone(),
            z,
            expected_cost,
        }
    }
}

fn log_j_with(state: &SolverState, problem: &RelayProblem, lambda: f64, terms: &OmegaTerms) -> Array1<f64> {
    let costs = problem.metric.costs();
    let theta = problem.theta.kernel();
    let dual = &state.dual;
    let zeta = dual.zeta();
    let log_psi = dual.log_psi_tilde();
    let col_mass = column_log_mass(dual.log_phi().view(), zeta, costs);
    let potential: Array1<f64> = col_mass
        .iter()
        .zip(log_psi.iter())
        .map(|(lm, lp)| lp - (lm + lp).exp())
        .collect();

    let reach = &terms.reach;
    let transport = reach.dot(&potential);
    let metric_cost: Array1<f64> = if zeta > 0.0 {
        reach
            .axis_iter(Axis(0))
            .zip(costs.axis_iter(Axis(0)))
            .map(|(a, d)| zeta * a.iter().zip(d.iter()).map(|(a, d)| a * d).sum::<f64>())
            .collect()
    } else {
        Array1::zeros(reach.nrows())
    };
    let log_r = state.r.mapv(ln_floor);
    let cross = state.omega.dot(&log_r);
    let divergence = &terms.neg_entropy - &cross;
    let compression = theta.dot(&divergence) * lambda;

    dual.log_phi() + &transport - &metric_cost - &compression
}

/// `J` itself. May under- or overflow for sharp metrics; the solver works with [`eval_log_j`].
pub fn eval_j(state: &SolverState, problem: &RelayProblem, lambda: f64) -> Array1<f64> {
    eval_log_j(state, problem, lambda).mapv(f64::exp)
}

fn input_from_log_j(log_j: &Array1<f64>) -> Result<Array1<f64>> {
    let mut p = log_j.to_vec();
    softmax_in_place(&mut p).ok_or(Error::DegenerateInput)?;
    Ok(Array1::from(p))
}

/// `p_i = J_i / Σ J`.
pub fn update_p(state: &SolverState, problem: &RelayProblem, lambda: f64) -> Result<Array1<f64>> {
    input_from_log_j(&eval_log_j(state, problem, lambda))
}

/// Power-tilted input law `p_i ∝ J_i exp(−μ ‖x_i‖²)` and its mean power.
fn tilted(log_j: &Array1<f64>, powers: &[f64], mu: f64) -> Option<(Array1<f64>, f64, f64)> {
    let mut w: Vec<f64> = log_j.iter().zip(powers).map(|(l, x)| l - mu * x).collect();
    softmax_in_place(&mut w)?;
    let mean: f64 = w.iter().zip(powers).map(|(w, x)| w * x).sum();
    let second: f64 = w.iter().zip(powers).map(|(w, x)| w * x * x).sum();
    Some((Array1::from(w), mean, second - mean * mean))
}

/// `F(μ) = Σ ‖x_i‖² J_i e^{−μ‖x_i‖²} / Σ J_i e^{−μ‖x_i‖²} − Γ`.
pub fn eval_f(mu: f64, log_j: &Array1<f64>, powers: &[f64], gamma: f64) -> f64 {
    eval_f_with_slope(mu, log_j, powers, gamma).0
}

/// `F(μ)` with `F'(μ) = −Var_p(‖x‖²)`.
pub fn eval_f_with_slope(mu: f64, log_j: &Array1<f64>, powers: &[f64], gamma: f64) -> (f64, f64) {
    match tilted(log_j, powers, mu) {
        Some((_, mean, var)) => (mean - gamma, -var),
        None => (f64::NAN, f64::NAN),
    }
}

fn power_tolerance(gamma: f64) -> f64 {
    1e-12 * (1.0 + gamma)
}

fn solve_mu(log_j: &Array1<f64>, powers: &[f64], gamma: f64, warm_start: f64) -> Result<f64> {
    let tol = power_tolerance(gamma);
    let (f0, _) = eval_f_with_slope(0.0, log_j, powers, gamma);
    if f0.is_nan() {
        return Err(Error::DegenerateInput);
    }
    if f0 <= tol {
        return Ok(0.0);
    }
    let min_power = powers.iter().copied().fold(f64::INFINITY, f64::min);
    let not_bracketed = Error::MuNotBracketed {
        limit: MU_LIMIT,
        min_power,
        limit_power: gamma,
    };
    if min_power > gamma + tol {
        return Err(not_bracketed);
    }
    match decreasing_root(
        |mu| eval_f_with_slope(mu, log_j, powers, gamma),
        warm_start,
        tol,
        MU_LIMIT,
    ) {
        RootSearch::Root(mu) => Ok(mu),
        RootSearch::NotBracketed => Err(not_bracketed),
    }
}

/// Input update under `E_p ‖x‖² <= Γ`. Returns the new `p` and `μ`; `μ = 0`
/// whenever the unconstrained update already meets the limit.
pub fn update_p_power(
    state: &SolverState,
    problem: &RelayProblem,
    lambda: f64,
    gamma: f64,
) -> Result<(Array1<f64>, f64)> {
    let powers = problem.symbol_powers().ok_or(Error::MissingConstellation)?;
    let log_j = eval_log_j(state, problem, lambda);
    power_step(&log_j, &powers, gamma, state.mu)
}

fn power_step(log_j: &Array1<f64>, powers: &[f64], gamma: f64, warm: f64) -> Result<(Array1<f64>, f64)> {
    let mu = solve_mu(log_j, powers, gamma, warm)?;
    let (p, _, _) = tilted(log_j, powers, mu).ok_or(Error::DegenerateInput)?;
    Ok((p, mu))
}

/// Unnormalized `ln Ω*`:
///
/// ```text
/// ln Ω*_kj = ln r_j + (ln ψ̃_j − (Λᵀφ)_j ψ̃_j) / λ − (ζ/λ) (Θᵀ Diag(p) D)_kj / (Θᵀ p)_k
/// ```
///
/// Rows with `(Θᵀ p)_k = 0` carry no weight and are returned as all zeros (uniform).
pub fn omega_star_logits(state: &SolverState, problem: &RelayProblem, lambda: f64) -> Array2<f64> {
    let costs = problem.metric.costs();
    let theta = problem.theta.kernel();
    let dual = &state.dual;
    let zeta = dual.zeta();
    let col_mass = column_log_mass(dual.log_phi().view(), zeta, costs);
    let column_term: Array1<f64> = col_mass
        .iter()
        .zip(dual.log_psi_tilde().iter())
        .zip(state.r.iter())
        .map(|((lm, lp), r)| ln_floor(*r) + (lp - (lm + lp).exp()) / lambda)
        .collect();

    let q = theta.t().dot(&state.p);
    let mut weighted = theta.clone();
    for (mut row, pi) in weighted.axis_iter_mut(Axis(0)).zip(state.p.iter()) {
        row *= *pi;
    }
    let averaged = if zeta > 0.0 {
        weighted.t().dot(costs)
    } else {
        Array2::zeros((problem.relay_size(), problem.output_size()))
    };

    let mut logits = Array2::zeros(averaged.dim());
    for (k, (mut row, avg)) in logits
        .axis_iter_mut(Axis(0))
        .zip(averaged.axis_iter(Axis(0)))
        .enumerate()
    {
        if q[k] <= 0.0 {
            continue;
        }
        // Divide by q_k first: the ratio is a conditional mean of D and stays bounded.
        let (scale, qk) = (zeta / lambda, q[k]);
        for ((l, c), a) in row.iter_mut().zip(column_term.iter()).zip(avg.iter()) {
            *l = c - scale * (a / qk);
        }
    }
    logits
}

/// Row-normalized `Ω*`.
pub fn update_omega(state: &SolverState, problem: &RelayProblem, lambda: f64) -> Result<Array2<f64>> {
    Ok(omega_with_entropy(state, problem, lambda)?.0)
}

/// `Ω*` and its rows' `Σ_j Ω_kj ln Ω_kj`, read off the logits.
fn omega_with_entropy(state: &SolverState, problem: &RelayProblem, lambda: f64) -> Result<(Array2<f64>, Array1<f64>)> {
    let logits = omega_star_logits(state, problem, lambda);
    let mut omega = logits.clone();
    let mut neg_entropy = Array1::zeros(omega.nrows());
    for (row, (mut w, l)) in omega.axis_iter_mut(Axis(0)).zip(logits.axis_iter(Axis(0))).enumerate() {
        let slice = w.as_slice_mut().expect("standard layout");
        let lse = softmax_in_place(slice).ok_or(Error::DegenerateRelayRow { row })?;
        flush_subnormals(slice);
        neg_entropy[row] = slice
            .iter()
            .zip(l.iter())
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, l)| w * (l - lse))
            .sum();
    }
    Ok((omega, neg_entropy))
}

/// `r = Ωᵀ Θᵀ p`.
pub fn update_r(state: &SolverState, problem: &RelayProblem) -> Array1<f64> {
    state.output_marginal(problem)
}

/// Objective in its `J` form, `−pᵀ ln p + pᵀ ln J + 1`.
pub fn eval_objective(state: &SolverState, problem: &RelayProblem, lambda: f64) -> f64 {
    objective_from_log_j(&state.p, &eval_log_j(state, problem, lambda))
}

fn objective_from_log_j(p: &Array1<f64>, log_j: &Array1<f64>) -> f64 {
    let entropy: f64 = -p.iter().map(|&x| xlnx(x)).sum::<f64>();
    let linear: f64 = p
        .iter()
        .zip(log_j.iter())
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, l)| pi * l)
        .sum();
    entropy + linear + 1.0
}

/// Objective in its dual form, `g_LM − λ I(Y;Z)`, with `ψ = ψ̃ ⊙ Ωᵀ Θᵀ p`.
///
/// Matches [`eval_objective`] whenever `r = Ωᵀ Θᵀ p`.
pub fn eval_objective_dual_form(state: &SolverState, problem: &RelayProblem, lambda: f64) -> Result<f64> {
    let g = eval_g_lm(&state.dual, &state.lm_marginals(problem), &problem.metric)?;
    Ok(g - lambda * rate_yz(state, problem))
}

/// `I(Y;Z)` under `Y ~ Θᵀ p` and the quantizer `Ω`, in nats.
pub fn rate_yz(state: &SolverState, problem: &RelayProblem) -> f64 {
    let q = state.relay_marginal(problem);
    let s = state.omega.t().dot(&q);
    state
        .omega
        .axis_iter(Axis(0))
        .zip(q.iter())
        .filter(|(_, qk)| **qk > 0.0)
        .map(|(row, qk)| qk * row.iter().zip(s.iter()).map(|(w, sj)| xln_ratio(*w, *sj)).sum::<f64>())
        .sum()
}

/// Stationarity residuals of the four dual blocks.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub phi: f64,
    pub psi: f64,
    pub zeta: f64,
    pub mu: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.phi.max(self.psi).max(self.zeta).max(self.mu)
    }
}

/// Residuals at `state`. `power_limit` is `Some(Γ)` only when the input is
/// optimized under a power limit; `r_μ` is zero otherwise.
pub fn residuals(
    state: &SolverState,
    problem: &RelayProblem,
    lambda: f64,
    power_limit: Option<f64>,
) -> Result<Residuals> {
    let log_j = power_limit.map(|_| eval_log_j(state, problem, lambda));
    residuals_with(
        state,
        problem,
        &state.lm_marginals(problem),
        power_limit,
        log_j.as_ref(),
    )
}

fn residuals_with(
    state: &SolverState,
    problem: &RelayProblem,
    marginals: &LmMarginals,
    power_limit: Option<f64>,
    log_j: Option<&Array1<f64>>,
) -> Result<Residuals> {
    let metric = &problem.metric;
    let phi = phi_residual(&state.dual, state.p.view(), state.r.view(), metric);
    let psi = psi_residual(&state.dual, state.r.view(), metric);
    let zeta = zeta_residual(&state.dual, marginals, metric)?;
    let mu = match (power_limit, log_j) {
        (Some(gamma), Some(log_j)) => {
            let powers = problem.symbol_powers().ok_or(Error::MissingConstellation)?;
            let f = eval_f(state.mu, log_j, &powers, gamma);
            if state.mu > 0.0 {
                f.abs()
            } else {
                f.max(0.0)
            }
        }
        _ => 0.0,
    };
    Ok(Residuals { phi, psi, zeta, mu })
}

/// The individual block updates, in iteration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Input,
    Quantizer,
    OutputMarginal,
    Phi,
    PsiTilde,
    Zeta,
}

impl Stage {
    pub const ORDER: [Stage; 6] = [
        Stage::Input,
        Stage::Quantizer,
        Stage::OutputMarginal,
        Stage::Phi,
        Stage::PsiTilde,
        Stage::Zeta,
    ];
}

/// Per-iteration residual histories.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualTraces {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub mu: Vec<f64>,
}

impl ResidualTraces {
    fn push(&mut self, r: &Residuals) {
        self.phi.push(r.phi);
        self.psi.push(r.psi);
        self.zeta.push(r.zeta);
        self.mu.push(r.mu);
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn last(&self) -> Option<Residuals> {
        Some(Residuals {
            phi: *self.phi.last()?,
            psi: *self.psi.last()?,
            zeta: *self.zeta.last()?,
            mu: *self.mu.last()?,
        })
    }
}

/// How a compression-budget search ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetStatus {
    /// `|I(Y;Z) − B| <= budget_tol`.
    Met,
    /// Even the smallest multiplier leaves `I(Y;Z) < B`; the constraint is slack.
    Inactive,
    /// The largest multiplier still leaves `I(Y;Z) > B`.
    BracketFailure,
    /// `I(Y;Z)` was not monotone in `λ` across the probes.
    NotMonotone,
    /// The bracket collapsed without meeting the tolerance (a jump in `I(Y;Z)`).
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetOutcome {
    /// Target `B` in nats.
    pub target: f64,
    pub status: BudgetStatus,
    /// `(λ, I(Y;Z))` for every probe, in evaluation order.
    pub probes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    /// LM-rate estimate `objective + λ I(Y;Z)`, in nats.
    pub capacity_lm: f64,
    /// `I(Y;Z)`, in nats.
    pub rate_yz: f64,
    pub lambda: f64,
    pub objective_trace: Vec<f64>,
    pub residual_traces: ResidualTraces,
    pub iterations: usize,
    pub converged: bool,
    /// Seed of the random start that produced this report.
    pub seed: u64,
    pub final_state: SolverState,
    pub budget: Option<BudgetOutcome>,
}

impl SolverReport {
    pub fn final_residuals(&self) -> Option<Residuals> {
        self.residual_traces.last()
    }
}

/// Step-wise driver for one run of the alternating maximization.
#[derive(Debug, Clone)]
pub struct AmSolver<'a> {
    problem: &'a RelayProblem,
    config: SolverConfig,
    powers: Option<Vec<f64>>,
    state: SolverState,
    terms: Option<OmegaTerms>,
    log_j: Option<Array1<f64>>,
}

impl<'a> AmSolver<'a> {
    pub fn new(problem: &'a RelayProblem, config: &SolverConfig) -> Result<Self> {
        let state = SolverState::initial(problem, config.seed);
        Self::with_state(problem, config, state)
    }

    pub fn with_state(problem: &'a RelayProblem, config: &SolverConfig, state: SolverState) -> Result<Self> {
        config.validate()?;
        let powers = if config.power_limit.is_some() && config.input == InputMode::Optimize {
            Some(problem.symbol_powers().ok_or(Error::MissingConstellation)?)
        } else {
            None
        };
        let (m, k, n) = (problem.input_size(), problem.relay_size(), problem.output_size());
        if state.p.len() != m || state.omega.dim() != (k, n) || state.r.len() != n {
            return Err(Error::DimensionMismatch {
                context: "solver state vs problem",
                expected: m * k * n,
                found: state.p.len() * state.omega.len(),
            });
        }
        Ok(Self {
            problem,
            config: config.clone(),
            powers,
            state,
            terms: None,
            log_j: None,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    fn power_limit(&self) -> Option<f64> {
        self.powers.as_ref().and(self.config.power_limit)
    }

    fn terms(&mut self) -> &OmegaTerms {
        if self.terms.is_none() {
            self.terms = Some(OmegaTerms::new(&self.state, self.problem));
        }
        self.terms.as_ref().expect("just filled")
    }

    fn log_j(&mut self) -> &Array1<f64> {
        if self.log_j.is_none() {
            self.terms();
            let terms = self.terms.as_ref().expect("filled above");
            self.log_j = Some(log_j_with(&self.state, self.problem, self.config.lambda, terms));
        }
        self.log_j.as_ref().expect("just filled")
    }

    fn marginals(&mut self) -> LmMarginals {
        let problem = self.problem;
        self.terms();
        let terms = self.terms.as_ref().expect("filled above");
        terms.marginals(&self.state.p, &problem.metric)
    }

    /// Current objective in the `J` form.
    pub fn objective(&mut self) -> f64 {
        let log_j = self.log_j().clone();
        objective_from_log_j(&self.state.p, &log_j)
    }

    /// Applies one block update.
    pub fn step(&mut self, stage: Stage) -> Result<()> {
        let problem = self.problem;
        let lambda = self.config.lambda;
        match stage {
            Stage::Input => {
                if self.config.input == InputMode::Uniform {
                    return Ok(());
                }
                let warm = self.state.mu;
                let powers = self.powers.clone();
                let gamma = self.power_limit();
                let log_j = self.log_j();
                let (p, mu) = match (powers, gamma) {
                    (Some(powers), Some(gamma)) => power_step(log_j, &powers, gamma, warm)?,
                    _ => (input_from_log_j(log_j)?, 0.0),
                };
                self.state.p = p;
                if gamma.is_some() {
                    self.state.mu = mu;
                }
                // J does not depend on p.
            }
            Stage::Quantizer => {
                let (omega, neg_entropy) = omega_with_entropy(&self.state, problem, lambda)?;
                self.state.omega = omega;
                self.terms = Some(OmegaTerms::with_entropy(&self.state, problem, neg_entropy));
                self.log_j = None;
            }
            Stage::OutputMarginal => {
                self.state.r = self.marginals().z;
                self.log_j = None;
            }
            Stage::Phi => {
                let log_phi = lm_dual::update_phi(
                    &self.state.dual,
                    self.state.p.view(),
                    self.state.r.view(),
                    &problem.metric,
                )?;
                self.state.dual.set_log_phi(log_phi);
                self.log_j = None;
            }
            Stage::PsiTilde => {
                let log_psi = lm_dual::update_psi_tilde(&self.state.dual, &problem.metric)?;
                self.state.dual.set_log_psi_tilde(log_psi);
                self.log_j = None;
            }
            Stage::Zeta => {
                let marginals = self.marginals();
                let warm = self.state.dual.zeta();
                let zeta = solve_zeta(&self.state.dual, &marginals, &problem.metric, warm)?;
                self.state.dual.set_zeta(zeta);
                self.log_j = None;
            }
        }
        Ok(())
    }

    /// One full sweep over [`Stage::ORDER`].
    pub fn iterate(&mut self) -> Result<()> {
        for stage in Stage::ORDER {
            self.step(stage)?;
        }
        Ok(())
    }

    pub fn residuals(&mut self) -> Result<Residuals> {
        let gamma = self.power_limit();
        let log_j = if gamma.is_some() {
            Some(self.log_j().clone())
        } else {
            None
        };
        let marginals = self.marginals();
        residuals_with(&self.state, self.problem, &marginals, gamma, log_j.as_ref())
    }

    /// Iterates until the residuals and the objective change fall below
    /// `residual_tol`, or `max_iter` sweeps have run.
    pub fn run(mut self) -> Result<SolverReport> {
        let mut objective_trace = Vec::new();
        let mut residual_traces = ResidualTraces::default();
        let mut converged = false;
        let mut iterations = 0;
        let mut previous = f64::NAN;
        while iterations < self.config.max_iter {
            self.iterate()?;
            iterations += 1;
            let objective = self.objective();
            let res = self.residuals()?;
            objective_trace.push(objective);
            residual_traces.push(&res);
            let change = (objective - previous).abs();
            previous = objective;
            if res.max().max(change) < self.config.residual_tol {
                converged = true;
                break;
            }
        }
        let lambda = self.config.lambda;
        let rate = rate_yz(&self.state, self.problem);
        let objective = self.objective();
        Ok(SolverReport {
            capacity_lm: objective + lambda * rate,
            rate_yz: rate,
            lambda,
            objective_trace,
            residual_traces,
            iterations,
            converged,
            seed: self.config.seed,
            final_state: self.state,
            budget: None,
        })
    }
}

/// Runs the alternating maximization at a fixed `λ`; with `restarts > 1` the
/// run with the largest final objective is returned.
pub fn solve(problem: &RelayProblem, config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let mut best: Option<(f64, SolverReport)> = None;
    for offset in 0..config.restarts as u64 {
        let mut run = config.clone();
        run.seed = config.seed.wrapping_add(offset);
        let report = AmSolver::new(problem, &run)?.run()?;
        let objective = report.capacity_lm - report.lambda * report.rate_yz;
        if best.as_ref().is_none_or(|(b, _)| objective > *b) {
            best = Some((objective, report));
        }
    }
    Ok(best.expect("at least one restart").1)
}
