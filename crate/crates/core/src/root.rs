//! Safeguarded Newton iteration for non-increasing scalar functions on `[0, ∞)`.
//!
//! Keeps a bracket `[lo, hi]` with `f(lo) > 0 >= f(hi)` and bisects whenever a
//! Newton step leaves it. The right end is grown geometrically until found.

/// Outcome of a root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum RootSearch {
    /// `|f(x)| <= tol`, or the bracket collapsed to machine precision around `x`.
    Root(f64),
    /// `f` stayed above `tol` all the way to `limit`.
    NotBracketed,
}

/// Finds `x > 0` with `|f(x)| <= tol`, assuming `f(0) > tol` and `f` non-increasing.
///
/// `f` returns the value and its derivative. Non-finite values are treated by
/// sign only.
pub(crate) fn decreasing_root<F>(mut f: F, start: f64, tol: f64, limit: f64) -> RootSearch
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut lo = 0.0_f64;
    let mut hi: Option<f64> = None;
    let mut x = if start.is_finite() && start > 0.0 {
        start.min(limit)
    } else {
        1.0_f64.min(limit)
    };

    for _ in 0..1000 {
        let (v, dv) = f(x);
        if v.abs() <= tol {
            return RootSearch::Root(x);
        }
        // NaN only arises from inf - inf in the positive branch.
        let positive = v > 0.0 || v.is_nan();
        if positive {
            lo = x;
        } else {
            hi = Some(x);
        }

        let newton = if v.is_finite() && dv.is_finite() && dv < 0.0 {
            x - v / dv
        } else {
            f64::NAN
        };

        x = match hi {
            None => {
                if x >= limit {
                    return RootSearch::NotBracketed;
                }
                let grown = if newton.is_finite() && newton > x {
                    newton
                } else {
                    (2.0 * x).max(1.0)
                };
                grown.min(limit)
            }
            Some(h) => {
                if h - lo <= 4.0 * f64::EPSILON * h || h < 1e-300 {
                    return RootSearch::Root(h);
                }
                if newton.is_finite() && newton > lo && newton < h {
                    newton
                } else {
                    0.5 * (lo + h)
                }
            }
        };
    }
    RootSearch::Root(x)
}
