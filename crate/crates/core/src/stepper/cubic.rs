//! Nodewise implicit relation `(1 - τ/2) u + (τ/2) u³ = r`.

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

/// Unique real root of `(1 - τ/2) u + (τ/2) u³ = r` for `0 < τ ≤ 2`.
///
/// The left side is strictly increasing, and `[-R, R]` with `R = max(1, |r|)`
/// always brackets the root. Newton steps that leave the bracket are replaced
/// by bisection. Iteration stops once `|residual| ≤ tol` (followed by one
/// polishing step) or the bracket has collapsed to adjacent floating-point
/// numbers.
pub fn pointwise_cubic_solve(r: f64, tau: f64, tol: f64) -> Result<f64> {
    if !(tau > 0.0 && tau <= 2.0) {
        return Err(Error::Domain(format!(
            "tau = {tau} outside (0, 2]: the nodewise cubic is not monotone"
        )));
    }
    if !r.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite right-hand side {r}"
        )));
    }
    Ok(solve_unchecked(r, tau, tol))
}

#[inline]
pub(crate) fn solve_unchecked(r: f64, tau: f64, tol: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let a = 1.0 - 0.5 * tau;
    let c = 0.5 * tau;
    let phi = |u: f64| a * u + c * u * u * u - r;

    let big = r.abs().max(1.0);
    let (mut lo, mut hi) = (-big, big);
    // A good start for small τ, and always inside the bracket.
    let mut u = r.clamp(lo, hi);
    let mut best = (u, phi(u).abs());
    for _ in 0..MAX_ITER {
        let f = phi(u);
        if f.abs() < best.1 {
            best = (u, f.abs());
        }
        if f.abs() <= tol {
            // One more Newton step moves the residual to rounding level.
            let polished = u - f / (a + 3.0 * c * u * u);
            return if phi(polished).abs() < f.abs() {
                polished
            } else {
                u
            };
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let df = a + 3.0 * c * u * u;
        let newton = u - f / df;
        u = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
    }
    let f = phi(u).abs();
    if f < best.1 {
        u
    } else {
        best.0
    }
}
