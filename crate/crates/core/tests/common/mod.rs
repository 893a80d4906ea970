#![allow(dead_code)]

use mismatch_relay::channels::{self, GridSpec, IqImbalanceParams, Scheme};
use mismatch_relay::{Alphabet, Channel, DecodingMetric, RelayProblem};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    let v = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(Exp1));
    let s = v.sum();
    v / s
}

pub fn stochastic(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for mut row in m.rows_mut() {
        row.assign(&dirichlet(rng, cols));
    }
    m
}

pub fn metric(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DecodingMetric {
    DecodingMetric::new(Array2::from_shape_fn((rows, cols), |_| scale * rng.random::<f64>())).unwrap()
}

/// Random `M × K` channel and `M × N` metric; with `points`, the input alphabet
/// carries random constellation points.
pub fn random_problem(rng: &mut ChaCha8Rng, m: usize, k: usize, n: usize, points: bool) -> RelayProblem {
    let kernel = stochastic(rng, m, k);
    let theta = if points {
        let pts: Vec<[f64; 2]> = (0..m)
            .map(|_| [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)])
            .collect();
        Channel::new(
            Alphabet::from_points(pts).unwrap(),
            Alphabet::indexed(k).unwrap(),
            kernel,
        )
        .unwrap()
    } else {
        Channel::from_matrix(kernel).unwrap()
    };
    RelayProblem::new(theta, metric(rng, m, n, 3.0)).unwrap()
}

pub fn quaternary(epsilon: f64) -> RelayProblem {
    RelayProblem::new(
        channels::quaternary_channel(epsilon).unwrap(),
        channels::metric_from_decoding_rule(epsilon).unwrap(),
    )
    .unwrap()
}

pub fn awgn(scheme: Scheme, snr_db: f64, n_points: usize) -> RelayProblem {
    let grid = GridSpec::new(n_points).unwrap();
    let c = channels::constellation(scheme);
    let params = IqImbalanceParams::new(0.9, std::f64::consts::PI / 18.0, snr_db).unwrap();
    RelayProblem::new(
        channels::awgn_iq_channel(&c, &params, &grid).unwrap(),
        channels::mismatch_metric_awgn(&c, &grid, None).unwrap(),
    )
    .unwrap()
}

/// `P_XY = Diag(p) Θ`.
pub fn joint_xy(p: &Array1<f64>, theta: &Array2<f64>) -> Array2<f64> {
    let mut j = theta.clone();
    for (mut row, pi) in j.rows_mut().into_iter().zip(p.iter()) {
        row *= *pi;
    }
    j
}
