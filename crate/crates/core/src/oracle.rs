//! Independent reference computations for tests: brute-force LM rates over a
//! grid of couplings, central finite differences, and a scalar-loop
//! re-implementation of the solver's closed-form quantities.
//!
//! Nothing in here is used by the solver itself.

use ndarray::{Array2, Axis};

use crate::am::{RelayProblem, SolverState};
use crate::error::{Error, Result};
use crate::prob::DecodingMetric;

/// Entries of an enumerated coupling in `[-CLIP_TOL, 0)` are treated as zero.
pub const CLIP_TOL: f64 = 1e-15;

/// Largest `M·N` the enumeration accepts.
pub const MAX_CELLS: usize = 9;

/// Default grid step: `1e-3` up to two free coordinates, `2e-2` beyond.
pub fn default_step(m: usize, n: usize) -> f64 {
    if (m - 1) * (n - 1) <= 2 {
        1e-3
    } else {
        2e-2
    }
}

/// Couplings of fixed marginals, parametrized by their leading `(M−1)×(N−1)` block.
#[derive(Debug, Clone)]
pub struct CouplingGrid {
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
    /// Grid step on each free coordinate.
    pub step: f64,
}

impl CouplingGrid {
    pub fn new(row_marginal: Vec<f64>, col_marginal: Vec<f64>, step: f64) -> Result<Self> {
        if row_marginal.len() < 2 || col_marginal.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "marginals",
                reason: "need at least two symbols on each side".into(),
            });
        }
        if row_marginal.iter().chain(&col_marginal).any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "marginals",
                reason: "brute force needs full-support marginals".into(),
            });
        }
        if !(step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "step",
                reason: format!("must be positive, got {step}"),
            });
        }
        Ok(Self {
            row_marginal,
            col_marginal,
            step,
        })
    }

    /// `M·N − M − N + 1`.
    pub fn free_dims(&self) -> usize {
        (self.row_marginal.len() - 1) * (self.col_marginal.len() - 1)
    }

    /// Completes a free block into a full coupling; `None` if any entry is negative.
    pub fn complete(&self, free: &[f64]) -> Option<Array2<f64>> {
        let (m, n) = (self.row_marginal.len(), self.col_marginal.len());
        let mut c = Array2::zeros((m, n));
        for i in 0..m - 1 {
            for j in 0..n - 1 {
                c[[i, j]] = free[i * (n - 1) + j];
            }
        }
        for i in 0..m - 1 {
            let used: f64 = (0..n - 1).map(|j| c[[i, j]]).sum();
            c[[i, n - 1]] = self.row_marginal[i] - used;
        }
        for j in 0..n {
            let used: f64 = (0..m - 1).map(|i| c[[i, j]]).sum();
            c[[m - 1, j]] = self.col_marginal[j] - used;
        }
        for v in c.iter_mut() {
            if *v < -CLIP_TOL {
                return None;
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Some(c)
    }

    /// Visits every grid point of the free block whose completion is a valid coupling.
    pub fn for_each<F: FnMut(&[f64], &Array2<f64>)>(&self, mut visit: F) {
        let dims = self.free_dims();
        let mut free = vec![0.0; dims];
        self.recurse(0, &mut free, &mut visit);
    }

    fn recurse<F: FnMut(&[f64], &Array2<f64>)>(&self, at: usize, free: &mut Vec<f64>, visit: &mut F) {
        let n1 = self.col_marginal.len() - 1;
        if at == free.len() {
            if let Some(c) = self.complete(free) {
                visit(free, &c);
            }
            return;
        }
        let (i, j) = (at / n1, at % n1);
        let row_used: f64 = (0..j).map(|jj| free[i * n1 + jj]).sum();
        let col_used: f64 = (0..i).map(|ii| free[ii * n1 + j]).sum();
        let cap = (self.row_marginal[i] - row_used).min(self.col_marginal[j] - col_used);
        let mut t = 0.0;
        let mut index = 0usize;
        while t <= cap + CLIP_TOL {
            free[at] = t.min(cap.max(0.0));
            self.recurse(at + 1, free, visit);
            index += 1;
            t = index as f64 * self.step;
        }
    }
}

fn coupling_information(c: &Array2<f64>, p: &[f64], s: &[f64]) -> f64 {
    c.indexed_iter()
        .filter(|(_, v)| **v > 0.0)
        .map(|((i, j), v)| v * (v / (p[i] * s[j])).ln())
        .sum()
}

/// LM rate by exhaustive search: the smallest `I(X;Z)` over grid couplings with
/// the joint's marginals and metric expectation at most `E_P[d]`, followed by
/// a local pass at `step/100`.
///
/// Only for `M·N <= 9` with full-support marginals. The result upper-bounds
/// the true LM rate.
pub fn lm_rate_bruteforce(joint: &Array2<f64>, metric: &DecodingMetric, step: f64) -> Result<f64> {
    let (m, n) = joint.dim();
    if metric.dim() != (m, n) {
        return Err(Error::DimensionMismatch {
            context: "joint vs metric",
            expected: m * n,
            found: metric.dim().0 * metric.dim().1,
        });
    }
    if m * n > MAX_CELLS {
        return Err(Error::InvalidParameter {
            name: "joint",
            reason: format!("brute force is limited to {MAX_CELLS} cells, got {}", m * n),
        });
    }
    let p: Vec<f64> = joint.sum_axis(Axis(1)).to_vec();
    let s: Vec<f64> = joint.sum_axis(Axis(0)).to_vec();
    let budget = metric.expectation(joint.view());
    let slack = 1e-12 * (1.0 + budget.abs());
    let grid = CouplingGrid::new(p.clone(), s.clone(), step)?;
    let n1 = n - 1;

    let feasible = |c: &Array2<f64>| metric.expectation(c.view()) <= budget + slack;

    // The joint itself is always feasible.
    let mut best_free: Vec<f64> = (0..m - 1)
        .flat_map(|i| (0..n1).map(move |j| (i, j)))
        .map(|(i, j)| joint[[i, j]])
        .collect();
    let mut best = coupling_information(joint, &p, &s);

    grid.for_each(|free, c| {
        if feasible(c) {
            let v = coupling_information(c, &p, &s);
            if v < best {
                best = v;
                best_free = free.to_vec();
            }
        }
    });

    let fine = step / 100.0;
    let offsets: Vec<f64> = (-100..=100).map(|k| k as f64 * fine).collect();
    let try_point = |free: &[f64], best: &mut f64, best_free: &mut Vec<f64>| {
        if let Some(c) = grid.complete(free) {
            if free.iter().all(|v| *v >= 0.0) && feasible(&c) {
                let v = coupling_information(&c, &p, &s);
                if v < *best {
                    *best = v;
                    *best_free = free.to_vec();
                }
            }
        }
    };
    let dims = grid.free_dims();
    if dims <= 2 {
        let center = best_free.clone();
        let second: &[f64] = if dims == 2 { &offsets } else { &[0.0] };
        for da in &offsets {
            for db in second {
                let mut cand = center.clone();
                cand[0] += da;
                if dims == 2 {
                    cand[1] += db;
                }
                try_point(&cand, &mut best, &mut best_free);
            }
        }
    } else {
        let coarse: Vec<f64> = (-20..=20).map(|k| k as f64 * step / 20.0).collect();
        for _round in 0..3 {
            for a in 0..dims {
                for b in a + 1..dims {
                    let center = best_free.clone();
                    for da in &coarse {
                        for db in &coarse {
                            let mut cand = center.clone();
                            cand[a] += da;
                            cand[b] += db;
                            try_point(&cand, &mut best, &mut best_free);
                        }
                    }
                }
            }
        }
    }
    Ok(best.max(0.0))
}

/// `|(f(x+h) − f(x−h)) / 2h − f'(x)| / (1 + |f'(x)|)`.
pub fn finite_diff_check<F: Fn(f64) -> f64>(f: F, derivative: f64, x: f64, h: f64) -> f64 {
    let central = (f(x + h) - f(x - h)) / (2.0 * h);
    (central - derivative).abs() / (1.0 + derivative.abs())
}

/// Linear-domain, loop-by-loop evaluation of `J`, the objective and `Ω*`.
#[derive(Debug, Clone)]
pub struct ScalarReference {
    pub j: Vec<f64>,
    pub objective: f64,
    /// Unnormalized `Ω*`, `K × N`.
    pub omega_star: Vec<Vec<f64>>,
}

/// Scalar re-implementation for tiny instances. Uses the potentials in the
/// linear domain, so it is only meaningful when `Λ`, `φ` and `ψ̃` are moderate.
#[allow(clippy::needless_range_loop)]
pub fn scalar_reference_eval(state: &SolverState, problem: &RelayProblem, lambda: f64) -> ScalarReference {
    let theta = problem.theta().kernel();
    let d = problem.metric().costs();
    let (m, k_size) = theta.dim();
    let n = d.ncols();
    let phi = state.dual.phi();
    let psi = state.dual.psi_tilde();
    let zeta = state.dual.zeta();
    let omega = &state.omega;
    let r = &state.r;
    let p = &state.p;

    let lam = |i: usize, j: usize| (-zeta * d[[i, j]]).exp();
    let mut lam_t_phi = vec![0.0; n];
    for j in 0..n {
        for i in 0..m {
            lam_t_phi[j] += lam(i, j) * phi[i];
        }
    }
    let mut theta_omega = vec![vec![0.0; n]; m];
    for i in 0..m {
        for j in 0..n {
            for k in 0..k_size {
                theta_omega[i][j] += theta[[i, k]] * omega[[k, j]];
            }
        }
    }

    let mut j_vec = vec![0.0; m];
    for i in 0..m {
        let mut exponent = 0.0;
        for j in 0..n {
            exponent += theta_omega[i][j] * (-lam_t_phi[j] * psi[j] + psi[j].ln());
            exponent -= zeta * theta_omega[i][j] * d[[i, j]];
        }
        for k in 0..k_size {
            let mut kl = 0.0;
            for j in 0..n {
                if omega[[k, j]] > 0.0 {
                    kl += omega[[k, j]] * (omega[[k, j]].ln() - r[j].ln());
                }
            }
            exponent -= lambda * theta[[i, k]] * kl;
        }
        j_vec[i] = phi[i] * exponent.exp();
    }

    let mut objective = 1.0;
    for i in 0..m {
        if p[i] > 0.0 {
            objective += -p[i] * p[i].ln() + p[i] * j_vec[i].ln();
        }
    }

    let mut omega_star = vec![vec![0.0; n]; k_size];
    for k in 0..k_size {
        let mut q_k = 0.0;
        for i in 0..m {
            q_k += theta[[i, k]] * p[i];
        }
        for j in 0..n {
            let mut weighted_cost = 0.0;
            for i in 0..m {
                weighted_cost += theta[[i, k]] * p[i] * d[[i, j]];
            }
            omega_star[k][j] = r[j]
                * psi[j].powf(1.0 / lambda)
                * ((-lam_t_phi[j] * psi[j]) / lambda).exp()
                * (-(zeta / lambda) * weighted_cost / q_k).exp();
        }
    }

    ScalarReference {
        j: j_vec,
        objective,
        omega_star,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn product_joint_has_zero_rate() {
        let joint = array![[0.12, 0.28], [0.18, 0.42]];
        let d = DecodingMetric::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(lm_rate_bruteforce(&joint, &d, 1e-3).unwrap() < 1e-12);
    }

    #[test]
    fn diagonal_joint_pins_coupling() {
        let joint = array![[0.5, 0.0], [0.0, 0.5]];
        let d = DecodingMetric::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let v = lm_rate_bruteforce(&joint, &d, 1e-3).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn grid_dimensions() {
        let g = CouplingGrid::new(vec![0.5, 0.5], vec![0.2, 0.3, 0.5], 0.1).unwrap();
        assert_eq!(g.free_dims(), 2);
        let mut count = 0;
        g.for_each(|_, c| {
            assert!((c.sum() - 1.0).abs() < 1e-12);
            assert!(c.iter().all(|v| *v >= 0.0));
            count += 1;
        });
        assert!(count > 0);
        assert!(CouplingGrid::new(vec![1.0, 0.0], vec![0.5, 0.5], 0.1).is_err());
    }

    #[test]
    fn linear_finite_difference_is_exact() {
        assert!(finite_diff_check(|x| 3.0 * x - 2.0, 3.0, 0.7, 1e-3) < 1e-12);
    }

    #[test]
    fn rejects_large_instances() {
        let joint = Array2::from_elem((2, 5), 0.1);
        let d = DecodingMetric::new(Array2::zeros((2, 5))).unwrap();
        assert!(lm_rate_bruteforce(&joint, &d, 1e-2).is_err());
    }
}
