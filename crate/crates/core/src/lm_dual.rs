//! Optimal-transport dual of the LM rate.
//!
//! For a fixed joint law `P_XZ` with marginals `p` and `s`, the LM rate is the
//! minimum of `I(X;Z)` over couplings of `p` and `s` whose expected metric does
//! not exceed `E_P[d]`. Its dual is a maximization over two potentials and the
//! metric multiplier `zeta`,
//!
//! ```text
//! g = -φᵀ Λ ψ + H(X) + H(Z) + E_P[ln Λ] + E_p[ln φ] + E_s[ln ψ] + 1,   Λ = exp(-ζ D),
//! ```
//!
//! with `ψ = ψ̃ ⊙ s`. The potentials are kept in the log domain: for sharp
//! metrics the entries of `Λ` underflow while `ψ̃` overflows, but their
//! products stay bounded.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::numeric::{ln_floor, log_sum_exp};
use crate::prob::{entropy_of, Channel, DecodingMetric, Distribution, FORBIDDEN_COST};
use crate::root::{decreasing_root, RootSearch};

/// Upper end of the bracket expansion for the metric multiplier.
pub const ZETA_LIMIT: f64 = 1e6;

/// Dual potentials of the LM rate.
///
/// `phi` pairs with the `X`-marginal, `psi_tilde` with the `Z`-marginal after
/// the change of variables `ψ̃ = ψ ./ s`, and `zeta` with the metric constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    log_phi: Array1<f64>,
    log_psi_tilde: Array1<f64>,
    zeta: f64,
}

impl DualState {
    /// `φ = 1`, `ψ̃ = 1`, `ζ = 1`.
    pub fn initial(m: usize, n: usize) -> Self {
        Self {
            log_phi: Array1::zeros(m),
            log_psi_tilde: Array1::zeros(n),
            zeta: 1.0,
        }
    }

    pub fn from_potentials(phi: &Array1<f64>, psi_tilde: &Array1<f64>, zeta: f64) -> Result<Self> {
        if phi.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonPositivePotential("phi"));
        }
        if psi_tilde.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonPositivePotential("psi_tilde"));
        }
        Self::from_logs(phi.mapv(f64::ln), psi_tilde.mapv(f64::ln), zeta)
    }

    pub fn from_logs(log_phi: Array1<f64>, log_psi_tilde: Array1<f64>, zeta: f64) -> Result<Self> {
        if log_phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonPositivePotential("phi"));
        }
        if log_psi_tilde.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonPositivePotential("psi_tilde"));
        }
        if !(zeta.is_finite() && zeta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "zeta",
                reason: format!("must be finite and non-negative, got {zeta}"),
            });
        }
        Ok(Self {
            log_phi,
            log_psi_tilde,
            zeta,
        })
    }

    pub fn log_phi(&self) -> &Array1<f64> {
        &self.log_phi
    }

    pub fn log_psi_tilde(&self) -> &Array1<f64> {
        &self.log_psi_tilde
    }

    /// `φ`; entries may overflow to `inf` for extreme metrics, use [`Self::log_phi`] then.
    pub fn phi(&self) -> Array1<f64> {
        self.log_phi.mapv(f64::exp)
    }

    pub fn psi_tilde(&self) -> Array1<f64> {
        self.log_psi_tilde.mapv(f64::exp)
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Gibbs kernel `Λ = exp(-ζ D)`, computed on demand.
    pub fn kernel(&self, metric: &DecodingMetric) -> Array2<f64> {
        metric.costs().mapv(|d| log_gibbs(self.zeta, d).exp())
    }

    pub fn set_log_phi(&mut self, log_phi: Array1<f64>) {
        self.log_phi = log_phi;
    }

    pub fn set_log_psi_tilde(&mut self, log_psi_tilde: Array1<f64>) {
        self.log_psi_tilde = log_psi_tilde;
    }

    pub fn set_zeta(&mut self, zeta: f64) {
        self.zeta = zeta;
    }

    fn check_dims(&self, metric: &DecodingMetric) -> Result<()> {
        let (m, n) = metric.dim();
        if self.log_phi.len() != m {
            return Err(Error::DimensionMismatch {
                context: "phi vs metric rows",
                expected: m,
                found: self.log_phi.len(),
            });
        }
        if self.log_psi_tilde.len() != n {
            return Err(Error::DimensionMismatch {
                context: "psi_tilde vs metric columns",
                expected: n,
                found: self.log_psi_tilde.len(),
            });
        }
        Ok(())
    }
}

/// The pieces of a joint law `P_XZ` that the dual depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct LmMarginals {
    /// `X`-marginal `p`.
    pub x: Array1<f64>,
    /// `Z`-marginal `s`.
    pub z: Array1<f64>,
    /// `E_P[d]`.
    pub expected_cost: f64,
}

impl LmMarginals {
    pub fn from_joint(joint: &Array2<f64>, metric: &DecodingMetric) -> Result<Self> {
        check_joint_shape(joint, metric)?;
        Ok(Self {
            x: joint.sum_axis(Axis(1)),
            z: joint.sum_axis(Axis(0)),
            expected_cost: metric.expectation(joint.view()),
        })
    }

    /// Marginals of the chain `X -> Y -> Z`.
    pub fn from_chain(p: &Distribution, theta: &Channel, omega: &Channel, metric: &DecodingMetric) -> Result<Self> {
        let joint = crate::prob::compose_joint(p, theta, omega)?;
        Self::from_joint(&joint, metric)
    }
}

fn check_joint_shape(joint: &Array2<f64>, metric: &DecodingMetric) -> Result<()> {
    let (m, n) = metric.dim();
    if joint.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "joint rows vs metric rows",
            expected: m,
            found: joint.nrows(),
        });
    }
    if joint.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "joint columns vs metric columns",
            expected: n,
            found: joint.ncols(),
        });
    }
    Ok(())
}

/// `ln Λ_ij = -ζ D_ij`, with forbidden entries mapped to an exact zero of the kernel when `ζ > 0`.
#[inline]
pub(crate) fn log_gibbs(zeta: f64, d: f64) -> f64 {
    if zeta > 0.0 && d >= FORBIDDEN_COST {
        f64::NEG_INFINITY
    } else {
        -zeta * d
    }
}

#[inline]
fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Dual objective `g_LM` evaluated term by term.
pub fn eval_g_lm(dual: &DualState, marginals: &LmMarginals, metric: &DecodingMetric) -> Result<f64> {
    dual.check_dims(metric)?;
    let costs = metric.costs();
    let zeta = dual.zeta;
    let p = &marginals.x;
    let s = &marginals.z;
    let log_psi: Array1<f64> = dual
        .log_psi_tilde
        .iter()
        .zip(s.iter())
        .map(|(lp, sj)| lp + ln_or_neg_inf(*sj))
        .collect();

    let transport = log_sum_exp(
        costs
            .indexed_iter()
            .map(|((i, j), d)| dual.log_phi[i] + log_gibbs(zeta, *d) + log_psi[j])
            .collect::<Vec<_>>(),
    )
    .exp();
    let h_x = entropy_of(p.view());
    let h_z = entropy_of(s.view());
    let e_log_kernel = -zeta * marginals.expected_cost;
    let e_log_phi: f64 = p
        .iter()
        .zip(dual.log_phi.iter())
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, l)| pi * l)
        .sum();
    let e_log_psi: f64 = s
        .iter()
        .zip(log_psi.iter())
        .filter(|(sj, _)| **sj > 0.0)
        .map(|(sj, l)| sj * l)
        .sum();
    Ok(-transport + h_x + h_z + e_log_kernel + e_log_phi + e_log_psi + 1.0)
}

/// `ln Σ_j exp(-ζ D_ij) ψ̃_j w_j` for every row `i`.
pub(crate) fn row_log_mass(
    log_psi_tilde: ArrayView1<'_, f64>,
    zeta: f64,
    weights: ArrayView1<'_, f64>,
    costs: &Array2<f64>,
) -> Array1<f64> {
    let shifted: Vec<f64> = log_psi_tilde
        .iter()
        .zip(weights.iter())
        .map(|(l, w)| l + ln_or_neg_inf(*w))
        .collect();
    costs
        .axis_iter(Axis(0))
        .map(|row| {
            log_sum_exp(
                row.iter()
                    .zip(shifted.iter())
                    .map(|(d, l)| l + log_gibbs(zeta, *d))
                    .collect::<Vec<_>>(),
            )
        })
        .collect()
}

/// `ln Σ_i φ_i exp(-ζ D_ij)` for every column `j`, i.e. `ln (Λᵀ φ)_j`.
pub(crate) fn column_log_mass(log_phi: ArrayView1<'_, f64>, zeta: f64, costs: &Array2<f64>) -> Array1<f64> {
    costs
        .axis_iter(Axis(1))
        .map(|col| {
            log_sum_exp(
                col.iter()
                    .zip(log_phi.iter())
                    .map(|(d, l)| l + log_gibbs(zeta, *d))
                    .collect::<Vec<_>>(),
            )
        })
        .collect()
}

/// `φ_i = p_i / Σ_j exp(-ζ D_ij) ψ̃_j r_j`, returned as `ln φ`.
///
/// Vanishing `p_i` is floored so the potential stays finite.
pub fn update_phi(
    dual: &DualState,
    p: ArrayView1<'_, f64>,
    r: ArrayView1<'_, f64>,
    metric: &DecodingMetric,
) -> Result<Array1<f64>> {
    dual.check_dims(metric)?;
    let denom = row_log_mass(dual.log_psi_tilde.view(), dual.zeta, r, metric.costs());
    denom
        .iter()
        .zip(p.iter())
        .enumerate()
        .map(|(row, (ld, pi))| {
            if ld.is_finite() {
                Ok(ln_floor(*pi) - ld)
            } else {
                Err(Error::DegenerateKernelRow { row })
            }
        })
        .collect()
}

/// `ψ̃_j = 1 / Σ_i φ_i exp(-ζ D_ij)`, returned as `ln ψ̃`.
pub fn update_psi_tilde(dual: &DualState, metric: &DecodingMetric) -> Result<Array1<f64>> {
    dual.check_dims(metric)?;
    column_log_mass(dual.log_phi.view(), dual.zeta, metric.costs())
        .iter()
        .enumerate()
        .map(|(column, l)| {
            if l.is_finite() {
                Ok(-l)
            } else {
                Err(Error::DegenerateKernelColumn { column })
            }
        })
        .collect()
}

/// Log-weights `ln φ_i + ln ψ̃_j + ln s_j` of the transport plan at `ζ = 0`.
fn plan_log_weights(dual: &DualState, s: ArrayView1<'_, f64>) -> Array2<f64> {
    let (m, n) = (dual.log_phi.len(), dual.log_psi_tilde.len());
    Array2::from_shape_fn((m, n), |(i, j)| {
        dual.log_phi[i] + dual.log_psi_tilde[j] + ln_or_neg_inf(s[j])
    })
}

/// `G(ζ)` and `G'(ζ)` from precomputed plan weights.
fn g_and_slope(zeta: f64, log_w: &Array2<f64>, costs: &Array2<f64>, expected_cost: f64) -> (f64, f64) {
    let mut max = f64::NEG_INFINITY;
    for (lw, d) in log_w.iter().zip(costs.iter()) {
        if *d != 0.0 {
            max = max.max(lw + log_gibbs(zeta, *d));
        }
    }
    if max == f64::NEG_INFINITY {
        return (-expected_cost, 0.0);
    }
    let (mut first, mut second) = (0.0, 0.0);
    for (lw, d) in log_w.iter().zip(costs.iter()) {
        if *d != 0.0 {
            let e = (lw + log_gibbs(zeta, *d) - max).exp();
            first += d * e;
            second += d * d * e;
        }
    }
    let scale = max.exp();
    (scale * first - expected_cost, -scale * second)
}

/// `G(ζ) = φᵀ (D ⊙ Λ) (ψ̃ ⊙ s) − E_P[d]`, the derivative of `g_LM` in `ζ`.
pub fn eval_g(zeta: f64, dual: &DualState, marginals: &LmMarginals, metric: &DecodingMetric) -> Result<f64> {
    Ok(eval_g_with_slope(zeta, dual, marginals, metric)?.0)
}

/// `G(ζ)` together with `G'(ζ) = −φᵀ (D ⊙ D ⊙ Λ) (ψ̃ ⊙ s)`.
pub fn eval_g_with_slope(
    zeta: f64,
    dual: &DualState,
    marginals: &LmMarginals,
    metric: &DecodingMetric,
) -> Result<(f64, f64)> {
    dual.check_dims(metric)?;
    let log_w = plan_log_weights(dual, marginals.z.view());
    Ok(g_and_slope(zeta, &log_w, metric.costs(), marginals.expected_cost))
}

/// Root tolerance on `G`, relative to the metric expectation.
pub fn zeta_tolerance(expected_cost: f64) -> f64 {
    1e-12 * (1.0 + expected_cost.abs())
}

/// Maximizes `g_LM` over `ζ >= 0` with the potentials held fixed.
///
/// Returns `0` when `G(0) <= 0`; otherwise the root of `G`, warm-started at
/// `warm_start` (the previous `ζ`).
pub fn solve_zeta(dual: &DualState, marginals: &LmMarginals, metric: &DecodingMetric, warm_start: f64) -> Result<f64> {
    dual.check_dims(metric)?;
    let log_w = plan_log_weights(dual, marginals.z.view());
    let costs = metric.costs();
    let ec = marginals.expected_cost;
    let tol = zeta_tolerance(ec);
    let (g0, _) = g_and_slope(0.0, &log_w, costs, ec);
    if g0 <= tol {
        return Ok(0.0);
    }
    match decreasing_root(|z| g_and_slope(z, &log_w, costs, ec), warm_start, tol, ZETA_LIMIT) {
        RootSearch::Root(z) => Ok(z),
        RootSearch::NotBracketed => Err(Error::ZetaNotBracketed { limit: ZETA_LIMIT }),
    }
}

/// KKT residual of the `ζ` update: `|G(ζ)|` for `ζ > 0`, `max(G(0), 0)` at the boundary.
pub fn zeta_residual(dual: &DualState, marginals: &LmMarginals, metric: &DecodingMetric) -> Result<f64> {
    let g = eval_g(dual.zeta, dual, marginals, metric)?;
    Ok(if dual.zeta > 0.0 { g.abs() } else { g.max(0.0) })
}

/// `Σ_i |φ_i Σ_j exp(-ζ D_ij) ψ̃_j r_j − p_i|`.
pub fn phi_residual(dual: &DualState, p: ArrayView1<'_, f64>, r: ArrayView1<'_, f64>, metric: &DecodingMetric) -> f64 {
    let mass = row_log_mass(dual.log_psi_tilde.view(), dual.zeta, r, metric.costs());
    mass.iter()
        .zip(dual.log_phi.iter())
        .zip(p.iter())
        .map(|((lm, lp), pi)| ((lm + lp).exp() - pi).abs())
        .sum()
}

/// `Σ_j |(ψ̃_j Σ_i φ_i exp(-ζ D_ij) − 1) r_j|`.
pub fn psi_residual(dual: &DualState, r: ArrayView1<'_, f64>, metric: &DecodingMetric) -> f64 {
    let mass = column_log_mass(dual.log_phi.view(), dual.zeta, metric.costs());
    mass.iter()
        .zip(dual.log_psi_tilde.iter())
        .zip(r.iter())
        .map(|((lm, lp), rj)| (((lm + lp).exp() - 1.0) * rj).abs())
        .sum()
}

/// Result of an LM-rate evaluation on a fixed joint law.
#[derive(Debug, Clone)]
pub struct LmRate {
    /// Dual value at the last iterate, in nats.
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Dual value after every individual update (`φ`, `ψ̃`, `ζ`).
    pub trace: Vec<f64>,
    /// Potentials on the support of the marginals.
    pub dual: DualState,
    /// Row and column indices kept after stripping zero-mass symbols.
    pub support: (Vec<usize>, Vec<usize>),
}

/// LM rate of a fixed joint law by alternating `φ`, `ψ̃` and `ζ` updates.
///
/// Symbols with zero marginal mass are stripped before iterating. Exhausting
/// `max_iter` is not an error: the best value so far is returned with
/// `converged == false`.
pub fn lm_rate_fixed_joint(joint: &Array2<f64>, metric: &DecodingMetric, tol: f64, max_iter: usize) -> Result<LmRate> {
    check_joint_shape(joint, metric)?;
    if joint.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidDistribution(
            "joint has a negative or non-finite entry".into(),
        ));
    }
    let total = joint.sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidDistribution(format!("joint sums to {total:.17}")));
    }
    let rows: Vec<usize> = (0..joint.nrows()).filter(|&i| joint.row(i).sum() > 0.0).collect();
    let cols: Vec<usize> = (0..joint.ncols()).filter(|&j| joint.column(j).sum() > 0.0).collect();
    let sub_joint = joint.select(Axis(0), &rows).select(Axis(1), &cols);
    let sub_metric = DecodingMetric::new(metric.costs().select(Axis(0), &rows).select(Axis(1), &cols))?;
    let marginals = LmMarginals::from_joint(&sub_joint, &sub_metric)?;

    let mut dual = DualState::initial(rows.len(), cols.len());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let log_phi = update_phi(&dual, marginals.x.view(), marginals.z.view(), &sub_metric)?;
        dual.set_log_phi(log_phi);
        trace.push(eval_g_lm(&dual, &marginals, &sub_metric)?);
        let log_psi = update_psi_tilde(&dual, &sub_metric)?;
        dual.set_log_psi_tilde(log_psi);
        trace.push(eval_g_lm(&dual, &marginals, &sub_metric)?);
        let zeta = solve_zeta(&dual, &marginals, &sub_metric, dual.zeta)?;
        dual.set_zeta(zeta);
        trace.push(eval_g_lm(&dual, &marginals, &sub_metric)?);

        let r_phi = phi_residual(&dual, marginals.x.view(), marginals.z.view(), &sub_metric);
        let r_psi = psi_residual(&dual, marginals.z.view(), &sub_metric);
        let r_zeta = zeta_residual(&dual, &marginals, &sub_metric)?;
        if r_phi.max(r_psi).max(r_zeta) < tol {
            converged = true;
            break;
        }
    }
    let value = eval_g_lm(&dual, &marginals, &sub_metric)?;
    Ok(LmRate {
        value,
        converged,
        iterations,
        trace,
        dual,
        support: (rows, cols),
    })
}
