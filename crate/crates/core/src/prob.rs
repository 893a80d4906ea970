//! Finite alphabets, distributions, channels and information measures.
//!
//! Every quantity here is in nats. Conversion to bits happens only at the
//! reporting boundary through [`nats_to_bits`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::xlnx;

/// Tolerance for the unit-sum check on distributions and channel rows.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Finite cost standing in for a forbidden (`+inf`) metric entry. Large enough
/// that `exp(-zeta * FORBIDDEN_COST)` underflows to zero for any useful `zeta`.
pub const FORBIDDEN_COST: f64 = 1e9;

#[inline]
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

#[inline]
pub fn bits_to_nats(bits: f64) -> f64 {
    bits * std::f64::consts::LN_2
}

/// An ordered set of symbols, optionally embedded in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    labels: Vec<String>,
    points: Option<Vec<[f64; 2]>>,
}

impl Alphabet {
    pub fn new(labels: Vec<String>, points: Option<Vec<[f64; 2]>>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidAlphabet("alphabet must be non-empty".into()));
        }
        let mut sorted: Vec<&String> = labels.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidAlphabet(format!("duplicate label `{}`", w[0])));
        }
        if let Some(pts) = &points {
            if pts.len() != labels.len() {
                return Err(Error::InvalidAlphabet(format!(
                    "{} points for {} labels",
                    pts.len(),
                    labels.len()
                )));
            }
            if pts.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::InvalidAlphabet("non-finite coordinate".into()));
            }
        }
        Ok(Self { labels, points })
    }

    /// Symbols labelled `0..size`.
    pub fn indexed(size: usize) -> Result<Self> {
        Self::new((0..size).map(|i| i.to_string()).collect(), None)
    }

    /// Symbols labelled by index and placed at `points`.
    pub fn from_points(points: Vec<[f64; 2]>) -> Result<Self> {
        let labels = (0..points.len()).map(|i| i.to_string()).collect();
        Self::new(labels, Some(points))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn points(&self) -> Option<&[[f64; 2]]> {
        self.points.as_deref()
    }

    /// Squared Euclidean norm of every point.
    pub fn powers(&self) -> Option<Vec<f64>> {
        self.points
            .as_ref()
            .map(|pts| pts.iter().map(|p| p[0] * p[0] + p[1] * p[1]).collect())
    }
}

fn check_simplex(v: ArrayView1<'_, f64>) -> std::result::Result<(), String> {
    if v.is_empty() {
        return Err("empty vector".into());
    }
    if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
        return Err(format!("entry {i} is {x}"));
    }
    let sum = v.sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(format!("entries sum to {sum:.17}"));
    }
    Ok(())
}

/// A probability vector on a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Array1<f64>);

impl Distribution {
    /// Validates without renormalizing; sums off by more than [`SIMPLEX_TOL`] are rejected.
    pub fn new(mass: Array1<f64>) -> Result<Self> {
        check_simplex(mass.view()).map_err(Error::InvalidDistribution)?;
        Ok(Self(mass))
    }

    pub fn from_vec(mass: Vec<f64>) -> Result<Self> {
        Self::new(Array1::from(mass))
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        Ok(Self(Array1::from_elem(size, 1.0 / size as f64)))
    }

    pub fn point_mass(size: usize, at: usize) -> Result<Self> {
        if at >= size {
            return Err(Error::InvalidDistribution(format!("index {at} out of {size}")));
        }
        let mut v = Array1::zeros(size);
        v[at] = 1.0;
        Ok(Self(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mass(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }
}

/// A row-stochastic transition matrix between two alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    input: Alphabet,
    output: Alphabet,
    kernel: Array2<f64>,
}

impl Channel {
    pub fn new(input: Alphabet, output: Alphabet, kernel: Array2<f64>) -> Result<Self> {
        if kernel.nrows() != input.len() {
            return Err(Error::DimensionMismatch {
                context: "channel rows vs input alphabet",
                expected: input.len(),
                found: kernel.nrows(),
            });
        }
        if kernel.ncols() != output.len() {
            return Err(Error::DimensionMismatch {
                context: "channel columns vs output alphabet",
                expected: output.len(),
                found: kernel.ncols(),
            });
        }
        for (row, r) in kernel.axis_iter(Axis(0)).enumerate() {
            check_simplex(r).map_err(|reason| Error::InvalidChannel { row, reason })?;
        }
        Ok(Self { input, output, kernel })
    }

    /// Channel over index-labelled alphabets.
    pub fn from_matrix(kernel: Array2<f64>) -> Result<Self> {
        let input = Alphabet::indexed(kernel.nrows().max(1))?;
        let output = Alphabet::indexed(kernel.ncols().max(1))?;
        Self::new(input, output, kernel)
    }

    pub fn identity(size: usize) -> Result<Self> {
        Self::from_matrix(Array2::eye(size))
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    pub fn input_size(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn output_size(&self) -> usize {
        self.kernel.ncols()
    }

    /// Output distribution `kernelᵀ p`.
    pub fn push_forward(&self, p: &Distribution) -> Result<Distribution> {
        if p.len() != self.input_size() {
            return Err(Error::DimensionMismatch {
                context: "input distribution vs channel rows",
                expected: self.input_size(),
                found: p.len(),
            });
        }
        Ok(Distribution(self.kernel.t().dot(p.mass())))
    }
}

/// Mismatched decoding costs `d(x_i, z_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodingMetric {
    costs: Array2<f64>,
}

impl DecodingMetric {
    /// `+inf` entries are replaced by [`FORBIDDEN_COST`]; NaN and `-inf` are rejected.
    pub fn new(mut costs: Array2<f64>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::InvalidMetric("empty cost matrix".into()));
        }
        for ((i, j), c) in costs.indexed_iter_mut() {
            if c.is_nan() || *c == f64::NEG_INFINITY {
                return Err(Error::InvalidMetric(format!("entry ({i}, {j}) is {c}")));
            }
            if *c == f64::INFINITY {
                *c = FORBIDDEN_COST;
            }
        }
        Ok(Self { costs })
    }

    pub fn costs(&self) -> &Array2<f64> {
        &self.costs
    }

    pub fn is_forbidden(&self, i: usize, j: usize) -> bool {
        self.costs[[i, j]] >= FORBIDDEN_COST
    }

    pub fn dim(&self) -> (usize, usize) {
        self.costs.dim()
    }

    /// `E_P[d]` under a joint distribution of matching shape.
    pub fn expectation(&self, joint: ArrayView2<'_, f64>) -> f64 {
        joint
            .iter()
            .zip(self.costs.iter())
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, c)| p * c)
            .sum()
    }
}

/// Joint law of `(X, Z)` for `X -> Y -> Z` with `X ~ p`, `Y|X ~ theta`, `Z|Y ~ omega`.
pub fn compose_joint(p: &Distribution, theta: &Channel, omega: &Channel) -> Result<Array2<f64>> {
    if p.len() != theta.input_size() {
        return Err(Error::DimensionMismatch {
            context: "input distribution vs first channel",
            expected: theta.input_size(),
            found: p.len(),
        });
    }
    if theta.output_size() != omega.input_size() {
        return Err(Error::DimensionMismatch {
            context: "first channel output vs second channel input",
            expected: theta.output_size(),
            found: omega.input_size(),
        });
    }
    let mut joint = theta.kernel().dot(omega.kernel());
    for (mut row, pi) in joint.axis_iter_mut(Axis(0)).zip(p.mass().iter()) {
        row *= *pi;
    }
    Ok(joint)
}

/// Shannon entropy in nats.
pub fn entropy(p: &Distribution) -> f64 {
    entropy_of(p.mass().view())
}

/// Entropy of an arbitrary non-negative vector, `-Σ v ln v`.
pub fn entropy_of(v: ArrayView1<'_, f64>) -> f64 {
    -v.iter().map(|&x| xlnx(x)).sum::<f64>()
}

/// Mutual information of a joint matrix in nats, `Σ P ln(P / (P_row P_col))`.
pub fn mutual_information(joint: &Array2<f64>) -> f64 {
    let rows = joint.sum_axis(Axis(1));
    let cols = joint.sum_axis(Axis(0));
    let mut total = 0.0;
    for ((i, j), &pij) in joint.indexed_iter() {
        if pij > 0.0 {
            total += pij * (pij.ln() - rows[i].ln() - cols[j].ln());
        }
    }
    total.max(0.0)
}
