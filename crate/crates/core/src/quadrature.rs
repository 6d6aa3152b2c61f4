//! Double-exponential (tanh–sinh) quadrature for integrands with
//! integrable endpoint singularities.
//!
//! The integrand receives the abscissa together with its distances to both
//! endpoints, computed without cancellation, so callers can evaluate
//! `1/√(s − p)`-type factors exactly down to subnormal distances.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy)]
pub struct TanhSinh {
    /// Successive-level relative change at which refinement stops.
    pub rel_tol: f64,
    /// Maximum number of step halvings.
    pub max_level: usize,
    /// Truncation of the transformed variable, `|t| <= t_max`.
    pub t_max: f64,
}

impl Default for TanhSinh {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_level: 12,
            t_max: 4.5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub levels: usize,
    pub rel_change: f64,
}

impl TanhSinh {
    /// Integrates `f(x, x − lo, hi − x)` over `[lo, hi]`.
    pub fn integrate<F>(&self, lo: f64, hi: f64, f: F) -> Result<Estimate>
    where
        F: Fn(f64, f64, f64) -> f64,
    {
        if hi == lo {
            return Ok(Estimate {
                value: 0.0,
                levels: 0,
                rel_change: 0.0,
            });
        }
        let (lo, hi, sign) = if hi > lo {
            (lo, hi, 1.0)
        } else {
            (hi, lo, -1.0)
        };
        let half = 0.5 * (hi - lo);
        let h0 = 0.5;
        // level 0 includes t = 0 and all multiples of h0
        let mut sum = self.node(lo, hi, half, 0.0, &f);
        let n0 = (self.t_max / h0).floor() as i64;
        for k in 1..=n0 {
            let t = k as f64 * h0;
            sum += self.node(lo, hi, half, t, &f) + self.node(lo, hi, half, -t, &f);
        }
        let mut estimate = h0 * sum;
        let mut h = h0;
        let mut rel_change = f64::INFINITY;
        for level in 1..=self.max_level {
            h *= 0.5;
            let mut t = h;
            while t <= self.t_max {
                sum += self.node(lo, hi, half, t, &f) + self.node(lo, hi, half, -t, &f);
                t += 2.0 * h;
            }
            let next = h * sum;
            rel_change = if next == 0.0 {
                (next - estimate).abs()
            } else {
                ((next - estimate) / next).abs()
            };
            estimate = next;
            if !estimate.is_finite() {
                break;
            }
            if level >= 3 && rel_change <= self.rel_tol {
                return Ok(Estimate {
                    value: sign * estimate,
                    levels: level,
                    rel_change,
                });
            }
        }
        if estimate.is_finite() && rel_change <= 100.0 * self.rel_tol {
            return Ok(Estimate {
                value: sign * estimate,
                levels: self.max_level,
                rel_change,
            });
        }
        Err(Error::QuadratureFailure { rel_change })
    }

    fn node<F>(&self, lo: f64, hi: f64, half: f64, t: f64, f: &F) -> f64
    where
        F: Fn(f64, f64, f64) -> f64,
    {
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        // distance to the nearer endpoint: half * (1 − tanh|u|)
        let near = half * 2.0 * e / (1.0 + e);
        if near <= 0.0 {
            return 0.0;
        }
        let weight = half * FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        let width = hi - lo;
        let (x, da, db) = if t >= 0.0 {
            (hi - near, width - near, near)
        } else {
            (lo + near, near, width - near)
        };
        let v = f(x, da, db);
        if v.is_finite() {
            weight * v
        } else {
            0.0
        }
    }
}

/// Integrates with the default rule.
pub fn integrate<F>(lo: f64, hi: f64, f: F) -> Result<f64>
where
    F: Fn(f64, f64, f64) -> f64,
{
    TanhSinh::default().integrate(lo, hi, f).map(|e| e.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial() {
        let v = integrate(0.0, 2.0, |x, _, _| x * x).unwrap();
        assert!((v - 8.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn inverse_sqrt_both_ends() {
        // ∫_0^1 dx / √(x(1−x)) = π
        let v = integrate(0.0, 1.0, |_, da, db| 1.0 / (da * db).sqrt()).unwrap();
        assert!((v - PI).abs() < 1e-12);
    }

    #[test]
    fn arccosh_kernel() {
        // ∫_p^ξ ds / √(s² − p²) = cosh⁻¹(ξ/p)
        let (p, xi) = (0.07, 0.4);
        let v = integrate(p, xi, |s, da, _| 1.0 / (da * (s + p)).sqrt()).unwrap();
        assert!((v - (xi / p).acosh()).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let v = integrate(1.0, 0.0, |x, _, _| x).unwrap();
        assert!((v + 0.5).abs() < 1e-14);
    }

    #[test]
    fn log_singularity() {
        let v = integrate(0.0, 1.0, |_, da, _| da.ln()).unwrap();
        assert!((v + 1.0).abs() < 1e-10);
    }
}
