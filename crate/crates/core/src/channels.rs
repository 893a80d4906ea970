//! Builders for the experimental channels: a quaternary channel with its
//! mismatched decoding rule, and a discretized AWGN channel with IQ imbalance
//! driven by QPSK or 16QAM.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::flush_subnormals;
use crate::prob::{Alphabet, Channel, DecodingMetric};

/// Symmetric quaternary law: `1 − ε` on the diagonal, `ε/3` elsewhere.
pub fn quaternary_channel(epsilon: f64) -> Result<Channel> {
    if !(0.0..=0.75).contains(&epsilon) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must lie in [0, 0.75], got {epsilon}"),
        });
    }
    Channel::from_matrix(quaternary_matrix(epsilon))
}

fn quaternary_matrix(epsilon: f64) -> Array2<f64> {
    Array2::from_shape_fn((4, 4), |(i, k)| if i == k { 1.0 - epsilon } else { epsilon / 3.0 })
}

/// Quaternary channel from an explicit 4×4 row-stochastic matrix.
pub fn quaternary_channel_from(kernel: Array2<f64>) -> Result<Channel> {
    if kernel.dim() != (4, 4) {
        return Err(Error::DimensionMismatch {
            context: "quaternary transition matrix",
            expected: 4,
            found: kernel.nrows(),
        });
    }
    Channel::from_matrix(kernel)
}

/// `d = −ln q` for the rule `q(x, z) = 1 − ε` if `x = z`, `ε/3` otherwise.
/// No normalization is applied; with `ε = 0` the off-diagonal is forbidden.
pub fn metric_from_decoding_rule(epsilon: f64) -> Result<DecodingMetric> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must lie in [0, 1), got {epsilon}"),
        });
    }
    DecodingMetric::new(quaternary_matrix(epsilon).mapv(|q| -q.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

/// Constellation with unit average power `(1/M) Σ ‖x_i‖² = 1`.
pub fn constellation(scheme: Scheme) -> Alphabet {
    let points = match scheme {
        Scheme::Qpsk => (0..4)
            .map(|k| {
                let angle = std::f64::consts::FRAC_PI_4 + k as f64 * std::f64::consts::FRAC_PI_2;
                [angle.cos(), angle.sin()]
            })
            .collect(),
        Scheme::Qam16 => {
            let s = 1.0 / 10f64.sqrt();
            let levels = [-3.0, -1.0, 1.0, 3.0];
            levels
                .iter()
                .flat_map(|&a| levels.iter().map(move |&b| [a * s, b * s]))
                .collect()
        }
    };
    Alphabet::from_points(points).expect("fixed constellation is valid")
}

/// Uniform square grid on `[−w, w]²` with `n_points = side²` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(n_points: usize) -> Result<Self> {
        let spec = Self {
            half_width: 8.0,
            n_points,
        };
        spec.side()?;
        Ok(spec)
    }

    pub fn with_half_width(mut self, half_width: f64) -> Result<Self> {
        self.half_width = half_width;
        self.side()?;
        Ok(self)
    }

    /// `√N`, validated to be an integer of at least 2.
    pub fn side(&self) -> Result<usize> {
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::InvalidParameter {
                name: "half_width",
                reason: format!("must be positive, got {}", self.half_width),
            });
        }
        let side = (self.n_points as f64).sqrt().round() as usize;
        if side < 2 || side * side != self.n_points {
            return Err(Error::InvalidParameter {
                name: "n_points",
                reason: format!("must be a perfect square of at least 4, got {}", self.n_points),
            });
        }
        Ok(side)
    }

    /// Node spacing `2w / (√N − 1)`.
    pub fn spacing(&self) -> Result<f64> {
        Ok(2.0 * self.half_width / (self.side()? as f64 - 1.0))
    }

    /// Index of node `(a, b)`: `a` steps along the first coordinate, `b` along the second.
    pub fn index(&self, a: usize, b: usize) -> Result<usize> {
        let side = self.side()?;
        Ok(a * side + b)
    }
}

/// Grid nodes; node `a·√N + b` sits at `(−w + a Δ, −w + b Δ)`.
pub fn make_grid(spec: &GridSpec) -> Result<Alphabet> {
    let side = spec.side()?;
    let step = spec.spacing()?;
    let w = spec.half_width;
    let points = (0..side)
        .flat_map(|a| (0..side).map(move |b| [-w + a as f64 * step, -w + b as f64 * step]))
        .collect();
    Alphabet::from_points(points)
}

/// IQ-imbalance and noise parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqImbalanceParams {
    /// Amplitude scaling of the quadrature branch, in `(0, 1]`.
    pub eta: f64,
    /// Rotation in radians.
    pub theta: f64,
    pub snr_db: f64,
}

impl IqImbalanceParams {
    pub fn new(eta: f64, theta: f64, snr_db: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must lie in (0, 1], got {eta}"),
            });
        }
        if !theta.is_finite() || !snr_db.is_finite() {
            return Err(Error::InvalidParameter {
                name: "theta/snr_db",
                reason: "must be finite".into(),
            });
        }
        Ok(Self { eta, theta, snr_db })
    }

    /// Noise standard deviation per dimension, from `SNR = 10 log10(1 / (2σ²))`.
    pub fn sigma_n(&self) -> f64 {
        (0.5 * 10f64.powf(-self.snr_db / 10.0)).sqrt()
    }

    /// `H = diag(1, η) · [[cos θ, sin θ], [−sin θ, cos θ]]`.
    pub fn h_matrix(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        [[c, s], [-self.eta * s, self.eta * c]]
    }
}

fn apply(h: &[[f64; 2]; 2], x: &[f64; 2]) -> [f64; 2] {
    [h[0][0] * x[0] + h[0][1] * x[1], h[1][0] * x[0] + h[1][1] * x[1]]
}

fn squared_distance(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Unnormalized discretized Gaussian: `(Δ² / 2πσ²) exp(−‖y_k − H x_i‖² / 2σ²)` per grid node.
/// Row sums approximate the Gaussian mass captured by the grid.
pub fn awgn_iq_riemann_mass(
    constellation: &Alphabet,
    params: &IqImbalanceParams,
    grid: &GridSpec,
) -> Result<Array2<f64>> {
    let xs = constellation.points().ok_or(Error::MissingConstellation)?;
    let ys = make_grid(grid)?;
    let ys = ys.points().expect("grid has points");
    let h = params.h_matrix();
    let sigma2 = params.sigma_n().powi(2);
    let cell = grid.spacing()?.powi(2) / (2.0 * std::f64::consts::PI * sigma2);
    Ok(Array2::from_shape_fn((xs.len(), ys.len()), |(i, k)| {
        let hx = apply(&h, &xs[i]);
        cell * (-squared_distance(&ys[k], &hx) / (2.0 * sigma2)).exp()
    }))
}

/// AWGN channel `Y = H X + N` restricted to the grid, rows normalized.
/// Entries below the smallest normal double are stored as zero.
pub fn awgn_iq_channel(constellation: &Alphabet, params: &IqImbalanceParams, grid: &GridSpec) -> Result<Channel> {
    let xs = constellation.points().ok_or(Error::MissingConstellation)?;
    let ys = make_grid(grid)?;
    let points = ys.points().expect("grid has points");
    let h = params.h_matrix();
    let two_sigma2 = 2.0 * params.sigma_n().powi(2);
    let mut kernel = Array2::zeros((xs.len(), points.len()));
    for (i, x) in xs.iter().enumerate() {
        let hx = apply(&h, x);
        // Shift by the nearest node so the peak is exp(0) and the row cannot underflow spuriously.
        let logits: Vec<f64> = points.iter().map(|y| -squared_distance(y, &hx) / two_sigma2).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut row = kernel.row_mut(i);
        for (v, l) in row.iter_mut().zip(&logits) {
            *v = (l - max).exp();
        }
        let total = row.sum();
        if !(total.is_finite() && total > 0.0) || max < -700.0 {
            return Err(Error::GridUnderflow { row: i });
        }
        row /= total;
        flush_subnormals(row.as_slice_mut().expect("standard layout"));
    }
    Channel::new(constellation.clone(), ys, kernel)
}

/// Squared distance `‖z_j − Ĥ x_i‖²`; `Ĥ = I` is the mismatched decoder.
pub fn mismatch_metric_awgn(
    constellation: &Alphabet,
    grid: &GridSpec,
    h_hat: Option<[[f64; 2]; 2]>,
) -> Result<DecodingMetric> {
    let xs = constellation.points().ok_or(Error::MissingConstellation)?;
    let zs = make_grid(grid)?;
    let zs = zs.points().expect("grid has points");
    let h = h_hat.unwrap_or([[1.0, 0.0], [0.0, 1.0]]);
    let costs = Array2::from_shape_fn((xs.len(), zs.len()), |(i, j)| {
        squared_distance(&zs[j], &apply(&h, &xs[i]))
    });
    DecodingMetric::new(costs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quaternary_examples() {
        assert_eq!(quaternary_channel(0.0).unwrap().kernel(), &Array2::<f64>::eye(4));
        assert!(quaternary_channel(0.75)
            .unwrap()
            .kernel()
            .iter()
            .all(|v| (v - 0.25).abs() < 1e-16));
        let c = quaternary_channel(0.3).unwrap();
        assert!((c.kernel()[[1, 1]] - 0.7).abs() < 1e-16);
        assert!((c.kernel()[[1, 2]] - 0.1).abs() < 1e-16);
        assert!(quaternary_channel(0.8).is_err());
        assert!(quaternary_channel(-0.1).is_err());
    }

    #[test]
    fn decoding_rule_metric() {
        let d = metric_from_decoding_rule(0.3).unwrap();
        assert!((d.costs()[[0, 0]] - 0.35667494393873245).abs() < 1e-15);
        assert!((d.costs()[[0, 1]] - std::f64::consts::LN_10).abs() < 1e-15);
        let d0 = metric_from_decoding_rule(0.0).unwrap();
        assert_eq!(d0.costs()[[2, 2]], 0.0);
        assert!(d0.is_forbidden(0, 3));
    }

    #[test]
    fn constellations_have_unit_power() {
        for scheme in [Scheme::Qpsk, Scheme::Qam16] {
            let powers = constellation(scheme).powers().unwrap();
            let mean = powers.iter().sum::<f64>() / powers.len() as f64;
            assert!((mean - 1.0).abs() < 1e-12, "{scheme:?}");
        }
        let qpsk = constellation(Scheme::Qpsk).powers().unwrap();
        assert!(qpsk.iter().all(|p| (p - 1.0).abs() < 1e-15));
        let qam = constellation(Scheme::Qam16);
        let corner = qam.points().unwrap().iter().find(|p| p[0] > 0.9 && p[1] > 0.9).unwrap();
        assert!((corner[0] - 3.0 / 10f64.sqrt()).abs() < 1e-15);
        assert!((corner[0].powi(2) + corner[1].powi(2) - 1.8).abs() < 1e-12);
    }

    #[test]
    fn small_grids() {
        let g4 = make_grid(&GridSpec::new(4).unwrap()).unwrap();
        assert_eq!(
            g4.points().unwrap(),
            &[[-8.0, -8.0], [-8.0, 8.0], [8.0, -8.0], [8.0, 8.0]]
        );
        let spec9 = GridSpec::new(9).unwrap();
        assert_eq!(spec9.spacing().unwrap(), 8.0);
        assert_eq!(make_grid(&spec9).unwrap().points().unwrap()[4], [0.0, 0.0]);
        let spec225 = GridSpec::new(225).unwrap();
        assert!((spec225.spacing().unwrap() - 16.0 / 14.0).abs() < 1e-15);
        assert_eq!(make_grid(&spec225).unwrap().points().unwrap()[0], [-8.0, -8.0]);
        assert!(GridSpec::new(10).is_err());
        assert!(GridSpec::new(1).is_err());
    }

    #[test]
    fn iq_parameters() {
        let p = IqImbalanceParams::new(0.9, std::f64::consts::PI / 18.0, 10.0).unwrap();
        let s = p.sigma_n();
        assert!((10.0 * (1.0 / (2.0 * s * s)).log10() - 10.0).abs() < 1e-12);
        let h = p.h_matrix();
        let (sn, cs) = (std::f64::consts::PI / 18.0).sin_cos();
        assert_eq!(h, [[cs, sn], [-0.9 * sn, 0.9 * cs]]);
        assert!(IqImbalanceParams::new(0.0, 0.0, 0.0).is_err());
        assert!(IqImbalanceParams::new(1.2, 0.0, 0.0).is_err());
    }

    #[test]
    fn metric_examples() {
        let qpsk = constellation(Scheme::Qpsk);
        let grid = GridSpec::new(9).unwrap();
        let d = mismatch_metric_awgn(&qpsk, &grid, None).unwrap();
        // node 4 is the origin; every QPSK point has unit norm
        for i in 0..4 {
            assert!((d.costs()[[i, 4]] - 1.0).abs() < 1e-15);
        }
    }
}
