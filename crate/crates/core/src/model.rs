//! The oscillator `x″ − g x + μ F(x) = 0`, its equilibria and every
//! threshold constant of the switched construction.

use crate::error::{Error, Result};
use crate::nonlinearity::{Clamped, Cubic, Nonlinearity};
use crate::roots;

/// Parameters of the switched equation `x″ − g x + n(t) F(x) = 0` with the
/// β-periodic step weight `n = n1` on `[0, α)` and `n = n0` on `[α, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub g: f64,
    pub a: f64,
    pub n0: f64,
    pub n1: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(g: f64, a: f64, n0: f64, n1: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self {
            g,
            a,
            n0,
            n1,
            alpha,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.g, self.a, self.n0, self.n1, self.alpha, self.beta]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if !(self.g > 0.0) {
            return Err(Error::InvalidParams(format!(
                "g = {} must be positive",
                self.g
            )));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::InvalidParams(format!(
                "a = {} must lie in (0,1)",
                self.a
            )));
        }
        if !(self.n0 > 0.0 && self.n0 < self.n1) {
            return Err(Error::InvalidParams(format!(
                "weights must satisfy 0 < n0 < n1 (n0 = {}, n1 = {})",
                self.n0, self.n1
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < self.beta) {
            return Err(Error::InvalidParams(format!(
                "phases must satisfy 0 < alpha < beta (alpha = {}, beta = {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn cubic(&self) -> Cubic {
        Cubic::new(self.a)
    }

    pub fn oscillator(&self) -> Oscillator<Cubic> {
        Oscillator::new(self.g, self.cubic())
    }

    /// Duration of the low phase, `β − α`.
    pub fn low_phase(&self) -> f64 {
        self.beta - self.alpha
    }

    /// The step weight `n(t)`.
    pub fn weight_at(&self, t: f64) -> f64 {
        let phase = t.rem_euclid(self.beta);
        if phase < self.alpha {
            self.n1
        } else {
            self.n0
        }
    }

    /// `∫_0^1 F > 0`; for the cubic this is `a < 1/2`.
    pub fn h0_holds(&self) -> bool {
        self.cubic().primitive(1.0) > 0.0
    }

    /// `n0 < m0*` and `n1 > m2*` for the given `μ̄`.
    pub fn in_main_regime(&self, mu_bar: f64) -> Result<bool> {
        let t = horseshoe_constants(self, mu_bar)?;
        Ok(self.n0 < t.m0star && self.n1 > t.m2star)
    }
}

/// Autonomous oscillator `x′ = y, y′ = g x − μ F(x)` for a family of
/// constant weights `μ`.
#[derive(Debug, Clone, Copy)]
pub struct Oscillator<N = Cubic> {
    pub g: f64,
    pub nl: N,
}

impl<N: Nonlinearity> Oscillator<N> {
    pub fn new(g: f64, nl: N) -> Self {
        Self { g, nl }
    }

    pub fn a(&self) -> f64 {
        self.nl.inner_zero()
    }

    /// `ℰ^μ(x, y) = ½y² − ½g x² + μ𝓕(x)`.
    pub fn energy(&self, mu: f64, x: f64, y: f64) -> f64 {
        0.5 * y * y - 0.5 * self.g * x * x + mu * self.nl.primitive(x)
    }

    /// `𝓗(x) = g x² − 2μ𝓕(x)`: along the zero level `y² = 𝓗(x)`.
    pub fn homoclinic_gap(&self, mu: f64, x: f64) -> f64 {
        self.g * x * x - 2.0 * mu * self.nl.primitive(x)
    }

    pub fn primitive_at_one(&self) -> f64 {
        self.nl.primitive(1.0)
    }

    pub fn require_h0(&self) -> Result<f64> {
        let integral = self.primitive_at_one();
        if integral > 0.0 {
            Ok(integral)
        } else {
            Err(Error::HypothesisH0Violated { integral })
        }
    }

    /// `g / max_{[a,1]} F(s)/s`.
    pub fn m0star(&self) -> f64 {
        let s = self.nl.max_slope_point();
        self.g * s / self.nl.value(s)
    }

    /// `g / (2∫_0^1 F)`.
    pub fn m1star(&self) -> Result<f64> {
        Ok(self.g / (2.0 * self.require_h0()?))
    }

    /// Smallest `μ > m0*` for which the zero level line meets the axis
    /// inside `(a_μ, c_μ)`, to absolute tolerance `tol`.
    pub fn m1star_optimal(&self, tol: f64) -> Result<f64> {
        let m1 = self.m1star()?;
        let m0 = self.m0star();
        // zero in (a_μ, c_μ) iff 𝓗 dips below zero at the saddle c_μ
        let crosses = |mu: f64| match self.equilibria(mu) {
            Ok((_, c)) => self.homoclinic_gap(mu, c) < 0.0,
            Err(_) => false,
        };
        let lo = m0 * (1.0 + 1e-12);
        if crosses(lo) {
            return Ok(m0);
        }
        Ok(roots::bisect_predicate(crosses, lo, m1, tol))
    }

    /// The center `a_μ` and saddle `c_μ` of the autonomous system, the two
    /// roots of `g s = μ F(s)` in `(a, 1)`.
    pub fn equilibria(&self, mu: f64) -> Result<(f64, f64)> {
        let m0star = self.m0star();
        if !(mu > m0star) {
            return Err(Error::NoEquilibria { mu, m0star });
        }
        let a = self.a();
        let s_star = self.nl.max_slope_point();
        let target = self.g / mu;
        let phi = |s: f64| self.nl.value(s) / s - target;
        let dphi = |s: f64| (s * self.nl.slope(s) - self.nl.value(s)) / (s * s);
        let center = roots::bracketed(phi, Some(dphi), a, s_star)?;
        let saddle = roots::bracketed(phi, Some(dphi), s_star, 1.0)?;
        Ok((center, saddle))
    }

    /// The zero `b ∈ (a, 1)` of `𝓕`.
    pub fn root_b(&self) -> Result<f64> {
        self.require_h0()?;
        let f = |s: f64| self.nl.primitive(s);
        let df = |s: f64| self.nl.value(s);
        roots::bracketed(f, Some(df), self.a(), 1.0)
    }

    /// Right turning point `b_μ` of the homoclinic loop.
    pub fn b_mu(&self, mu: f64) -> Result<f64> {
        let m1star = self.m1star()?;
        if !(mu > m1star) {
            return Err(Error::BelowHomoclinicThreshold { mu, m1star });
        }
        let (center, saddle) = self.equilibria(mu)?;
        let h = |x: f64| self.homoclinic_gap(mu, x);
        let dh = |x: f64| 2.0 * (self.g * x - mu * self.nl.value(x));
        roots::bracketed(h, Some(dh), center, saddle)
    }

    /// The conjugate `x0⁺ ∈ (a, 1)` with `𝓕(x0⁺) = 𝓕(x0)`.
    pub fn x_plus(&self, x0: f64) -> Result<f64> {
        let a = self.a();
        if !(x0 > 0.0 && x0 < a) {
            return Err(Error::OutOfRange {
                what: "x0",
                value: x0,
                lo: 0.0,
                hi: a,
            });
        }
        let level = self.nl.primitive(x0);
        let f = |s: f64| self.nl.primitive(s) - level;
        let df = |s: f64| self.nl.value(s);
        roots::bracketed(f, Some(df), a, 1.0)
            .map_err(|_| Error::NoSolution(format!("no conjugate of x0 = {x0} in (a, 1)")))
    }

    /// `(Λ, Θ) = (sup F(s)/s, sup −F(s)/s)` over `(0, 1]`.
    pub fn lambda_theta(&self) -> (f64, f64) {
        let s_star = self.nl.max_slope_point();
        let mut lambda = self.nl.value(s_star) / s_star;
        // −F(s)/s is decreasing on (0, a] by convexity; its sup is −F′(0⁺)
        let mut theta = -self.nl.slope(0.0);
        let n = 2048;
        for i in 1..=n {
            let s = i as f64 / n as f64;
            let r = self.nl.value(s) / s;
            lambda = lambda.max(r);
            theta = theta.max(-r);
        }
        (lambda, theta)
    }
}

impl Oscillator<Cubic> {
    /// The oscillator whose `F` is clamped to `[−1,1]` outside `[0,1]`.
    pub fn clamped(&self) -> Clamped<Cubic> {
        Clamped::new(self.nl)
    }
}

/// Every threshold constant of the construction, for one parameter set and
/// one choice of `μ̄ > m1*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub m0star: f64,
    pub m1star: f64,
    pub m1star_optimal: f64,
    pub lambda_sup: f64,
    pub theta_sup: f64,
    pub b: f64,
    pub mu_bar: f64,
    pub b_mu_bar: f64,
    pub kappa: f64,
    pub eta: f64,
    pub mu_star: f64,
    pub mu_tilde: f64,
    pub m2star: f64,
    pub p_hat0: f64,
}

/// Default `μ̄` when none is configured: twice the homoclinic threshold.
pub fn default_mu_bar(params: &ModelParams) -> Result<f64> {
    Ok(2.0 * params.oscillator().m1star()?)
}

/// `κ = cosh((β − α)/2 · √(g − n0 Λ))`.
pub fn kappa(params: &ModelParams) -> Result<f64> {
    let (lambda, _) = params.oscillator().lambda_theta();
    let product = params.n0 * lambda;
    if product >= params.g {
        return Err(Error::WeightTooLarge {
            product,
            g: params.g,
        });
    }
    Ok((0.5 * params.low_phase() * (params.g - product).sqrt()).cosh())
}

pub fn horseshoe_constants(params: &ModelParams, mu_bar: f64) -> Result<Thresholds> {
    let osc = params.oscillator();
    let nl = osc.nl;
    let a = params.a;
    let g = params.g;
    let m0star = osc.m0star();
    let m1star = osc.m1star()?;
    if !(mu_bar > m1star) {
        return Err(Error::BelowHomoclinicThreshold { mu: mu_bar, m1star });
    }
    let (lambda_sup, theta_sup) = osc.lambda_theta();
    let kappa = kappa(params)?;
    let m1star_optimal = osc.m1star_optimal(1e-10)?;
    let b = osc.root_b()?;
    let b_mu_bar = osc.b_mu(mu_bar)?;

    let mut eta = nl.value(b).min(nl.value(b_mu_bar));
    for i in 1..64 {
        let s = b + (b_mu_bar - b) * i as f64 / 64.0;
        eta = eta.min(nl.value(s));
    }

    let mu_star = g * (kappa + 1.0) / (2.0 * eta * b);
    let mu_tilde = g * (kappa * kappa * (a * a + 1.0) - 1.0) / (kappa * (kappa - 1.0) * b * eta);
    let m2star = mu_star.max(mu_tilde);

    let target = -eta * b * (kappa - 1.0) / (2.0 * kappa);
    let p_hat0 = if target <= nl.primitive(a) {
        // every p0 in (0, a] already satisfies the energy inequality
        a
    } else {
        roots::bracketed(
            |s| nl.primitive(s) - target,
            Some(|s: f64| nl.value(s)),
            0.0,
            a,
        )?
    };

    Ok(Thresholds {
        m0star,
        m1star,
        m1star_optimal,
        lambda_sup,
        theta_sup,
        b,
        mu_bar,
        b_mu_bar,
        kappa,
        eta,
        mu_star,
        mu_tilde,
        m2star,
        p_hat0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn osc(g: f64, a: f64) -> Oscillator<Cubic> {
        Oscillator::new(g, Cubic::new(a))
    }

    #[test]
    fn m0star_examples() {
        assert!((osc(0.5, 0.4).m0star() - 5.555_555_555_555_555).abs() < 1e-12);
        assert!((osc(0.1, 0.4).m0star() - 1.111_111_111_111_111).abs() < 1e-12);
        // degenerate a = 0, formula only
        assert!((osc(1.0, 0.0).m0star() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn m1star_examples() {
        assert!((osc(0.5, 0.4).m1star().unwrap() - 15.0).abs() < 1e-12);
        assert!((osc(0.1, 0.4).m1star().unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(
            osc(0.1, 0.6).m1star(),
            Err(Error::HypothesisH0Violated { .. })
        ));
    }

    #[test]
    fn m1star_optimal_improves() {
        let o = osc(0.1, 0.4);
        let opt = o.m1star_optimal(1e-10).unwrap();
        assert!(opt < 3.0 && opt > o.m0star(), "opt = {opt}");
        // just above the optimum the loop closes inside (a_μ, c_μ)
        let (_, c) = o.equilibria(opt + 1e-6).unwrap();
        assert!(o.homoclinic_gap(opt + 1e-6, c) < 0.0);
        let (_, c) = o.equilibria(opt - 1e-6).unwrap();
        assert!(o.homoclinic_gap(opt - 1e-6, c) > 0.0);
    }

    #[test]
    fn equilibria_examples() {
        let (am, cm) = osc(0.1, 0.4).equilibria(10.0).unwrap();
        assert!((am - 0.417_157_3).abs() < 1e-7);
        assert!((cm - 0.982_842_7).abs() < 1e-7);
        let (am, cm) = osc(0.5, 0.4).equilibria(16.0).unwrap();
        assert!((am - 0.457_616_0).abs() < 1e-7);
        assert!((cm - 0.942_384_0).abs() < 1e-7);
        assert!(matches!(
            osc(0.5, 0.4).equilibria(5.0),
            Err(Error::NoEquilibria { .. })
        ));
    }

    #[test]
    fn root_b_examples() {
        assert!((osc(0.1, 0.4).root_b().unwrap() - 2.0 / 3.0).abs() < 1e-14);
        let o = osc(0.1, 0.25);
        let b = o.root_b().unwrap();
        assert!(o.nl.primitive(b).abs() < 1e-12);
        // smaller root of 3b² − 4(1+a)b + 6a = 0
        let closed = (5.0 - (25.0 - 18.0f64).sqrt()) / 6.0;
        assert!((b - closed).abs() < 1e-12);
        let near = osc(0.1, 0.4999).root_b().unwrap();
        assert!(near > 0.99);
    }

    #[test]
    fn b_mu_examples() {
        let o = osc(0.1, 0.4);
        assert!((o.b_mu(10.0).unwrap() - 0.707_255_7).abs() < 1e-7);
        let far = o.b_mu(1e4).unwrap();
        assert!(far > 2.0 / 3.0 && far < 0.668);
        assert!(matches!(
            o.b_mu(2.0),
            Err(Error::BelowHomoclinicThreshold { .. })
        ));
    }

    #[test]
    fn x_plus_examples() {
        let o = osc(0.1, 0.4);
        assert!((o.x_plus(0.07).unwrap() - 0.652_494).abs() < 1e-6);
        let near = o.x_plus(0.4 - 1e-6).unwrap();
        assert!(near > 0.4 && near < 0.4 + 1e-4);
        let mid = o.x_plus(0.2).unwrap();
        assert!(mid > 0.4 && mid < 2.0 / 3.0);
        assert!((o.nl.primitive(mid) - o.nl.primitive(0.2)).abs() < 1e-12);
        assert!(matches!(o.x_plus(0.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn lambda_theta_examples() {
        let (l, t) = osc(0.5, 0.4).lambda_theta();
        assert!((l - 0.09).abs() < 1e-14);
        assert!((t - 0.4).abs() < 1e-14);
        assert!((0.5 / l - osc(0.5, 0.4).m0star()).abs() < 1e-12);
        let (l, _) = osc(0.5, 0.999).lambda_theta();
        assert!(l < 1e-6);
    }

    #[test]
    fn horseshoe_constants_example() {
        let p = ModelParams::new(0.1, 0.4, 0.5, 200.0, 4.0, 6.0).unwrap();
        let t = horseshoe_constants(&p, 10.0).unwrap();
        assert!((t.kappa - 0.055f64.sqrt().cosh()).abs() < 1e-14);
        assert!((t.kappa - 1.027_626_3).abs() < 1e-7);
        // F is increasing on [b, b_μ̄] = [2/3, 0.70726], so η = F(b)
        assert!((t.eta - 2.0 / 3.0 * (2.0 / 3.0 - 0.4) / 3.0).abs() < 1e-12);
        assert_eq!(t.m2star, t.mu_star.max(t.mu_tilde));
        assert!(t.p_hat0 > 0.0 && t.p_hat0 < 0.4);
        let target = -t.eta * t.b * (t.kappa - 1.0) / (2.0 * t.kappa);
        assert!((p.cubic().primitive(t.p_hat0) - target).abs() < 1e-14);
    }

    #[test]
    fn short_low_phase_pushes_m2star_up() {
        let mut last = 0.0;
        for &gap in &[1.0, 0.1, 0.01, 0.001] {
            let p = ModelParams::new(0.1, 0.4, 0.5, 200.0, 4.0, 4.0 + gap).unwrap();
            let t = horseshoe_constants(&p, 6.0).unwrap();
            assert!(t.kappa > 1.0);
            assert!(t.m2star > last);
            last = t.m2star;
        }
        assert!(last > 1e5);
    }

    #[test]
    fn constants_errors() {
        let p = ModelParams::new(0.1, 0.4, 0.5, 200.0, 4.0, 6.0).unwrap();
        assert!(matches!(
            horseshoe_constants(&p, 2.0),
            Err(Error::BelowHomoclinicThreshold { .. })
        ));
        let heavy = ModelParams::new(0.1, 0.4, 1.2, 200.0, 4.0, 6.0).unwrap();
        assert!(matches!(
            horseshoe_constants(&heavy, 6.0),
            Err(Error::WeightTooLarge { .. })
        ));
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.1, 0.4, 0.5, 0.5, 1.0, 2.0).is_err());
        assert!(ModelParams::new(0.1, 1.2, 0.5, 1.0, 1.0, 2.0).is_err());
        assert!(ModelParams::new(0.1, 0.4, 0.5, 1.0, 2.0, 2.0).is_err());
        let p = ModelParams::new(0.1, 0.4, 0.5, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(p.weight_at(0.5), 1.0);
        assert_eq!(p.weight_at(1.5), 0.5);
        assert_eq!(p.weight_at(2.5), 1.0);
        assert!(p.h0_holds());
    }
}
