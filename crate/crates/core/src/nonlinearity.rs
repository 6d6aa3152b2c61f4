//! N-shaped nonlinearities `F` and their global (clamped) extensions.

use crate::roots;

/// An N-shaped reaction term with zeros `0 < a < 1`.
///
/// Implementors must satisfy `F(0) = F(a) = F(1) = 0`, `F < 0` on
/// `(0,a) ∪ (1,∞)` and `F > 0` on `(-∞,0) ∪ (a,1)`, with `F` strictly
/// convex on `[0,a]` and strictly concave on `[a,1]`.
pub trait Nonlinearity: Send + Sync {
    fn inner_zero(&self) -> f64;

    fn value(&self, s: f64) -> f64;

    fn slope(&self, s: f64) -> f64;

    /// `∫_0^s F`.
    fn primitive(&self, s: f64) -> f64;

    /// `(𝓕(s0 + h) − 𝓕(s0)) / h`, with the limit `F(s0)` at `h = 0`.
    ///
    /// Time-map integrands divide a level-line gap by its distance to a
    /// turning point; overriding this with an exact expansion keeps those
    /// integrands accurate arbitrarily close to the singular endpoint.
    fn primitive_secant(&self, s0: f64, h: f64) -> f64 {
        if h == 0.0 {
            self.value(s0)
        } else {
            (self.primitive(s0 + h) - self.primitive(s0)) / h
        }
    }

    /// Maximizer of `F(s)/s` over `[a,1]`, i.e. the root of `sF′(s) = F(s)`.
    fn max_slope_point(&self) -> f64 {
        let a = self.inner_zero();
        let g = |s: f64| s * self.slope(s) - self.value(s);
        roots::bisect(g, a + 1e-12 * (1.0 - a), 1.0).unwrap_or(1.0)
    }
}

/// The Nagumo cubic `F(s) = s(s − a)(1 − s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub a: f64,
}

impl Cubic {
    pub fn new(a: f64) -> Self {
        Self { a }
    }

    pub fn second_slope(&self, s: f64) -> f64 {
        -6.0 * s + 2.0 * (1.0 + self.a)
    }
}

impl Nonlinearity for Cubic {
    fn inner_zero(&self) -> f64 {
        self.a
    }

    fn value(&self, s: f64) -> f64 {
        s * (s - self.a) * (1.0 - s)
    }

    fn slope(&self, s: f64) -> f64 {
        -3.0 * s * s + 2.0 * (1.0 + self.a) * s - self.a
    }

    fn primitive(&self, s: f64) -> f64 {
        let s2 = s * s;
        -0.25 * s2 * s2 + (1.0 + self.a) * s2 * s / 3.0 - 0.5 * self.a * s2
    }

    fn primitive_secant(&self, s0: f64, h: f64) -> f64 {
        // exact Taylor expansion of a quartic
        let f = self.value(s0);
        let f1 = self.slope(s0);
        let f2 = self.second_slope(s0);
        f + h * (0.5 * f1 + h * (f2 / 6.0 - 0.25 * h))
    }

    fn max_slope_point(&self) -> f64 {
        0.5 * (1.0 + self.a)
    }
}

/// A nonlinearity extended outside `[0,1]` by clamping its magnitude to 1,
/// which makes every solution of the oscillator global in time.
#[derive(Debug, Clone, Copy)]
pub struct Clamped<N> {
    inner: N,
    /// `F = 1` left of this point (`-∞` when `F` never reaches 1 on the left).
    left: f64,
    /// `F = −1` right of this point.
    right: f64,
    primitive_left: f64,
    primitive_right: f64,
}

impl<N: Nonlinearity> Clamped<N> {
    pub fn new(inner: N) -> Self {
        let left = outward_crossing(&inner, 0.0, -1.0, 1.0);
        let right = outward_crossing(&inner, 1.0, 1.0, -1.0);
        let primitive_left = if left.is_finite() {
            inner.primitive(left)
        } else {
            0.0
        };
        let primitive_right = if right.is_finite() {
            inner.primitive(right)
        } else {
            0.0
        };
        Self {
            inner,
            left,
            right,
            primitive_left,
            primitive_right,
        }
    }

    pub fn inner(&self) -> &N {
        &self.inner
    }

    pub fn clamp_points(&self) -> (f64, f64) {
        (self.left, self.right)
    }

    /// Derivative of the clamped extension (zero where the clamp is active).
    pub fn slope(&self, s: f64) -> f64 {
        if (0.0..=1.0).contains(&s) || self.inner.value(s).abs() < 1.0 {
            self.inner.slope(s)
        } else {
            0.0
        }
    }

    /// `F` on `[0,1]`, `F` clamped to `[−1, 1]` outside.
    pub fn value(&self, s: f64) -> f64 {
        if (0.0..=1.0).contains(&s) {
            self.inner.value(s)
        } else {
            self.inner.value(s).clamp(-1.0, 1.0)
        }
    }

    /// Antiderivative of [`Self::value`] vanishing at 0.
    pub fn primitive(&self, s: f64) -> f64 {
        if s < self.left {
            self.primitive_left + (s - self.left)
        } else if s > self.right {
            self.primitive_right - (s - self.right)
        } else {
            self.inner.primitive(s)
        }
    }

    /// True where the clamp changes `F` (never on `[0,1]`).
    pub fn is_clamped(&self, s: f64) -> bool {
        s < self.left || s > self.right
    }
}

fn outward_crossing<N: Nonlinearity>(nl: &N, start: f64, dir: f64, level: f64) -> f64 {
    let mut step = 0.5;
    let mut inner = start;
    for _ in 0..60 {
        let outer = start + dir * step;
        if (nl.value(outer) - level) * level >= 0.0 {
            return roots::bisect(|s| nl.value(s) - level, inner, outer).unwrap_or(outer);
        }
        inner = outer;
        step *= 2.0;
    }
    dir * f64::INFINITY
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_values() {
        let f = Cubic::new(0.4);
        assert_eq!(f.value(0.0), 0.0);
        assert!((f.value(0.7) - 0.063).abs() < 1e-15);
        assert!((f.value(0.2) + 0.032).abs() < 1e-15);
    }

    #[test]
    fn cubic_primitive() {
        let f = Cubic::new(0.4);
        assert!((f.primitive(1.0) - 0.2 / 12.0).abs() < 1e-15);
        assert!((f.primitive(0.07) + 8.259358e-4).abs() < 1e-10);
        assert_eq!(f.primitive(0.0), 0.0);
    }

    #[test]
    fn secant_matches_difference() {
        let f = Cubic::new(0.3);
        for &(s0, h) in &[(0.1, 0.2), (0.5, -0.3), (0.9, 0.05)] {
            let direct = (f.primitive(s0 + h) - f.primitive(s0)) / h;
            assert!((f.primitive_secant(s0, h) - direct).abs() < 1e-14);
        }
        assert_eq!(f.primitive_secant(0.2, 0.0), f.value(0.2));
    }

    #[test]
    fn clamped_extension() {
        let c = Clamped::new(Cubic::new(0.4));
        assert!((c.value(0.5) - 0.025).abs() < 1e-15);
        assert_eq!(c.value(-10.0), 1.0);
        assert_eq!(c.value(2.0), -1.0);
        let (l, r) = c.clamp_points();
        assert!(l < 0.0 && r > 1.0);
        assert!((Cubic::new(0.4).value(l) - 1.0).abs() < 1e-12);
        assert!((Cubic::new(0.4).value(r) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn clamped_primitive_is_continuous_antiderivative() {
        let c = Clamped::new(Cubic::new(0.4));
        let (l, r) = c.clamp_points();
        for &s in &[l, r] {
            let jump = c.primitive(s + 1e-9) - c.primitive(s - 1e-9);
            assert!(jump.abs() < 1e-8);
        }
        for &s in &[-3.0, -0.5, 0.3, 1.2, 4.0] {
            let h = 1e-6;
            let d = (c.primitive(s + h) - c.primitive(s - h)) / (2.0 * h);
            assert!((d - c.value(s)).abs() < 1e-6, "s = {s}");
        }
    }

    #[test]
    fn generic_max_slope_point_matches_closed_form() {
        struct Plain(Cubic);
        impl Nonlinearity for Plain {
            fn inner_zero(&self) -> f64 {
                self.0.a
            }
            fn value(&self, s: f64) -> f64 {
                self.0.value(s)
            }
            fn slope(&self, s: f64) -> f64 {
                self.0.slope(s)
            }
            fn primitive(&self, s: f64) -> f64 {
                self.0.primitive(s)
            }
        }
        let p = Plain(Cubic::new(0.25));
        assert!((p.max_slope_point() - 0.625).abs() < 1e-12);
    }
}
