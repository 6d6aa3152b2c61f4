//! Bracketed scalar root finding.
//!
//! Every root in the crate goes through [`bracketed`]: bisection down to a
//! bracket of width [`BRACKET_WIDTH`], then a single Newton step from the
//! midpoint when a derivative is available and the step stays inside the
//! final bracket.

use crate::error::{Error, Result};

pub const BRACKET_WIDTH: f64 = 1e-13;

/// Finds a root of `f` in `[lo, hi]`; `f(lo)` and `f(hi)` must not share a sign.
pub fn bracketed<F, D>(f: F, df: Option<D>, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSolution(format!(
            "no sign change on [{lo}, {hi}] (f = {f_lo:e}, {f_hi:e})"
        )));
    }
    for _ in 0..200 {
        if hi - lo <= BRACKET_WIDTH {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if let Some(df) = df {
        let d = df(mid);
        if d != 0.0 && d.is_finite() {
            let polished = mid - f(mid) / d;
            if polished >= lo && polished <= hi {
                return Ok(polished);
            }
        }
    }
    Ok(mid)
}

/// Derivative-free convenience wrapper around [`bracketed`].
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    bracketed(f, None::<fn(f64) -> f64>, lo, hi)
}

/// Bisection on a boolean predicate: returns `t` with `pred` flipping within
/// `tol` of it. `pred(lo)` and `pred(hi)` must differ.
pub fn bisect_predicate<P: FnMut(f64) -> bool>(
    mut pred: P,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    let p_lo = pred(lo);
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if pred(mid) == p_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
