//! Scalar Newton–Raphson with a bisection safeguard.

use crate::error::{Error, Result};

/// Finds a root of `f` in `[lo, hi]` starting from `x0`, where `f(lo)` and
/// `f(hi)` have opposite signs. A Newton step that leaves the current
/// bracket, or is not finite, is replaced by a bisection step. Stops when
/// the step is below `tol`; fails after `max_iter` steps.
pub fn newton_raphson(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    x0: f64,
    (mut lo, mut hi): (f64, f64),
    tol: f64,
    max_iter: u32,
) -> Result<f64> {
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    let rising = f_lo < 0.0;
    let mut x = x0.clamp(lo, hi);
    for _ in 0..max_iter {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == rising {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / df(x);
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step < tol || hi - lo < tol {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        what: "Newton-Raphson",
        iterations: max_iter,
    })
}
