//! Small log-domain helpers shared by the solver modules.

/// Probabilities are clamped to this value before a logarithm whose argument
/// may vanish mid-iteration. Sums are always taken on the unclamped values.
pub const LOG_FLOOR: f64 = 1e-300;

/// `ln(max(x, LOG_FLOOR))`.
#[inline]
pub fn ln_floor(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

/// `x ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `x ln(x / y)` with `0 ln(0 / y) = 0`.
#[inline]
pub fn xln_ratio(x: f64, y: f64) -> f64 {
    if x > 0.0 {
        x * (x.ln() - ln_floor(y))
    } else {
        0.0
    }
}

/// Numerically stable `ln Σ exp(v)`. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = iter.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Normalizes log-weights in place into a probability vector, returning the
/// log normalizer. `None` if every weight is `-inf`.
pub fn softmax_in_place(logits: &mut [f64]) -> Option<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut total = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in logits.iter_mut() {
        *v /= total;
    }
    Some(max + total.ln())
}

/// Sets entries below the smallest normal double to zero. Subnormal operands
/// make every later product an order of magnitude slower.
pub fn flush_subnormals(values: &mut [f64]) {
    for v in values.iter_mut() {
        if v.abs() < f64::MIN_POSITIVE {
            *v = 0.0;
        }
    }
}
