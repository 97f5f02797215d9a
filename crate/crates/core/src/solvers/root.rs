//! Safeguarded Newton iteration on an open bracket.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Root {
    pub x: f64,
    pub f: f64,
    pub iterations: usize,
}

/// Finds the root of a strictly decreasing `f` on the open interval
/// `(lo, hi)`, where `f > 0` near `lo` and `f < 0` near `hi`. The endpoints
/// themselves are never evaluated, so `f` may be singular there.
///
/// `f` returns the value and derivative. Newton steps that leave the current
/// bracket or fail to halve the previous step fall back to bisection.
/// Iteration stops once `|f| <= stop_tol` or the bracket has shrunk to a few
/// ulps.
pub(crate) fn decreasing_root(
    mut f: impl FnMut(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    guess: f64,
    stop_tol: f64,
    max_iter: usize,
) -> Result<Root> {
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::Bracket(format!("empty bracket ({lo}, {hi})")));
    }
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    let mut last_step = hi - lo;
    let mut step = last_step;
    for iteration in 1..=max_iter {
        let (fx, dfx) = f(x);
        if fx.is_nan() {
            return Err(Error::Bracket(format!("function is NaN at {x}")));
        }
        if fx.abs() <= stop_tol {
            return Ok(Root {
                x,
                f: fx,
                iterations: iteration,
            });
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(Root {
                x,
                f: fx,
                iterations: iteration,
            });
        }
        let newton = x - fx / dfx;
        let newton_ok = fx.is_finite()
            && dfx.is_finite()
            && newton > lo
            && newton < hi
            && (2.0 * fx).abs() <= (last_step * dfx).abs();
        last_step = step;
        let next = if newton_ok { newton } else { 0.5 * (lo + hi) };
        step = (next - x).abs();
        if step <= 2.0 * f64::EPSILON * x.abs() {
            return Ok(Root {
                x: next,
                f: fx,
                iterations: iteration,
            });
        }
        x = next;
    }
    Err(Error::Bracket(format!(
        "no convergence in {max_iter} iterations, bracket ({lo}, {hi})"
    )))
}
