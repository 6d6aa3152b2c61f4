//! Time maps of the autonomous oscillators: the transit time `σ` along a
//! level line, the period `τ` of the closed orbits around the center, their
//! bounds and large-weight limit, and the timing inequalities of the
//! switched construction.
//!
//! Every integrand has the form `1/√G(s)` where `G` vanishes linearly at a
//! turning point. `G` is factored as `h · q(h)` with `h` the distance to the
//! turning point, using the exact secant of the primitive, so the quadrature
//! sees `1/√(h q(h))` without cancellation however small `h` gets.

use crate::error::{Error, Result};
use crate::model::{kappa, ModelParams, Oscillator};
use crate::nonlinearity::Nonlinearity;
use crate::quadrature::TanhSinh;
use crate::roots;

fn rule() -> TanhSinh {
    TanhSinh::default()
}

/// `G(p0 + h) / h` for the level line through `(p0, 0)`.
fn gap_quotient_left<N: Nonlinearity>(osc: &Oscillator<N>, mu: f64, p0: f64, h: f64) -> f64 {
    osc.g * (2.0 * p0 + h) - 2.0 * mu * osc.nl.primitive_secant(p0, h)
}

/// `G(x1 − h) / h` for the level line through `(x1, 0)`.
fn gap_quotient_right<N: Nonlinearity>(osc: &Oscillator<N>, mu: f64, x1: f64, h: f64) -> f64 {
    2.0 * mu * osc.nl.primitive_secant(x1, -h) - osc.g * (2.0 * x1 - h)
}

/// Time to travel from `(p0, 0)` to the vertical line `x = ξ` along the
/// level line of the weight-`μ` oscillator through `(p0, 0)`, for
/// `0 < μ < m0*` (no nontrivial equilibria).
pub fn sigma<N: Nonlinearity>(osc: &Oscillator<N>, mu: f64, p0: f64, xi: f64) -> Result<f64> {
    check_sigma_query(osc, mu, p0, xi)?;
    let est = rule().integrate(p0, xi, |_, h, _| {
        1.0 / (h * gap_quotient_left(osc, mu, p0, h)).sqrt()
    })?;
    Ok(est.value)
}

fn check_sigma_query<N: Nonlinearity>(
    osc: &Oscillator<N>,
    mu: f64,
    p0: f64,
    xi: f64,
) -> Result<()> {
    let m0star = osc.m0star();
    if !(mu > 0.0 && mu < m0star) {
        return Err(Error::InvalidRegime(format!(
            "sigma needs 0 < mu < m0* = {m0star}, got mu = {mu}"
        )));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::OutOfRange {
            what: "p0",
            value: p0,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if !(xi > p0 && xi <= 1.0) {
        return Err(Error::OutOfRange {
            what: "xi",
            value: xi,
            lo: p0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Closed-form sandwich `(lo, hi)` around [`sigma`].
pub fn sigma_bounds<N: Nonlinearity>(
    osc: &Oscillator<N>,
    mu: f64,
    p0: f64,
    xi: f64,
) -> Result<(f64, f64)> {
    if xi == p0 && p0 > 0.0 {
        return Ok((0.0, 0.0));
    }
    check_sigma_query(osc, mu, p0, xi)?;
    let (lambda, theta) = osc.lambda_theta();
    let ach = (xi / p0).acosh();
    Ok((
        ach / (osc.g + mu * theta).sqrt(),
        ach / (osc.g - mu * lambda).sqrt(),
    ))
}

/// Minimal period of the closed orbit of the weight-`μ` oscillator through
/// `(x0, 0)`, together with its right turning point `x1`.
pub fn tau<N: Nonlinearity>(osc: &Oscillator<N>, mu: f64, x0: f64) -> Result<(f64, f64)> {
    let m1star = osc.m1star()?;
    if !(mu > m1star) {
        return Err(Error::InvalidRegime(format!(
            "tau needs mu > m1* = {m1star}, got mu = {mu}"
        )));
    }
    let (center, _) = osc.equilibria(mu)?;
    if !(x0 > 0.0 && x0 < center) {
        return Err(Error::OutOfRange {
            what: "x0",
            value: x0,
            lo: 0.0,
            hi: center,
        });
    }
    let x1 = conjugate_turning_point(osc, mu, x0)?;
    let left = rule().integrate(x0, center, |_, h, _| {
        1.0 / (h * gap_quotient_left(osc, mu, x0, h)).sqrt()
    })?;
    let right = rule().integrate(center, x1, |_, _, h| {
        1.0 / (h * gap_quotient_right(osc, mu, x1, h)).sqrt()
    })?;
    Ok((2.0 * (left.value + right.value), x1))
}

/// The other axis point `x1 ∈ (a_μ, b_μ)` of the closed level line through
/// `(x0, 0)`.
fn conjugate_turning_point<N: Nonlinearity>(osc: &Oscillator<N>, mu: f64, x0: f64) -> Result<f64> {
    let (center, _) = osc.equilibria(mu)?;
    let level = osc.energy(mu, x0, 0.0);
    let floor = osc.energy(mu, center, 0.0);
    if !(level > floor && level < 0.0) {
        return Err(Error::NotClosedOrbit {
            x0,
            energy: level,
            center: floor,
        });
    }
    let b_mu = osc.b_mu(mu)?;
    let f = |s: f64| osc.energy(mu, s, 0.0) - level;
    let df = |s: f64| -osc.g * s + mu * osc.nl.value(s);
    roots::bracketed(f, Some(df), center, b_mu)
}

/// `lim_{μ→∞} τ(μ, x0) √μ = √2 ∫_{x0}^{x0⁺} ds / √(𝓕(x0) − 𝓕(s))`.
pub fn tau_limit<N: Nonlinearity>(osc: &Oscillator<N>, x0: f64) -> Result<f64> {
    osc.require_h0()?;
    let a = osc.a();
    let xp = osc.x_plus(x0)?;
    let nl = &osc.nl;
    let left = rule().integrate(x0, a, |_, h, _| {
        1.0 / (-h * nl.primitive_secant(x0, h)).sqrt()
    })?;
    let right = rule().integrate(a, xp, |_, _, h| {
        1.0 / (h * nl.primitive_secant(xp, -h)).sqrt()
    })?;
    Ok(std::f64::consts::SQRT_2 * (left.value + right.value))
}

/// Time spent on the homoclinic loop of the weight-`μ` oscillator between
/// the abscissa `x ∈ (0, b_μ)` and the turning point `(b_μ, 0)`.
pub fn homoclinic_time<N: Nonlinearity>(osc: &Oscillator<N>, mu: f64, x: f64) -> Result<f64> {
    let b = osc.b_mu(mu)?;
    if !(x > 0.0 && x <= b) {
        return Err(Error::OutOfRange {
            what: "x",
            value: x,
            lo: 0.0,
            hi: b,
        });
    }
    if x == b {
        return Ok(0.0);
    }
    let mid = 0.5 * b;
    let turn_from = x.max(mid);
    let turn = rule().integrate(turn_from, b, |_, _, h| {
        1.0 / (h * gap_quotient_right(osc, mu, b, h)).sqrt()
    })?;
    if x >= mid {
        return Ok(turn.value);
    }
    // near the saddle G(s) ~ s², so integrate ds/√G = s/√G d(ln s)
    let g = |s: f64| osc.g * s * s - 2.0 * mu * osc.nl.primitive(s);
    let tail = rule().integrate(x.ln(), mid.ln(), |u, _, _| {
        let s = u.exp();
        s / g(s).sqrt()
    })?;
    Ok(turn.value + tail.value)
}

/// State after time `t` of the point `(x, y)` of the homoclinic loop with
/// `y ≥ 0`, computed by inverting [`homoclinic_time`]. Well conditioned
/// however close the result comes to the saddle, unlike direct
/// integration near the unstable manifold.
pub fn homoclinic_flight<N: Nonlinearity>(
    osc: &Oscillator<N>,
    mu: f64,
    x: f64,
    y: f64,
    t: f64,
) -> Result<(f64, f64)> {
    if y < 0.0 {
        return Err(Error::OutOfRange {
            what: "y",
            value: y,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let b = osc.b_mu(mu)?;
    let to_turn = homoclinic_time(osc, mu, x)?;
    let (remaining, sign) = if t <= to_turn {
        (to_turn - t, 1.0)
    } else {
        (t - to_turn, -1.0)
    };
    let failure = std::cell::Cell::new(None);
    // solve in ln x so that the relative accuracy survives near the saddle
    let f = |u: f64| match homoclinic_time(osc, mu, u.exp().min(b)) {
        Ok(v) => v - remaining,
        Err(e) => {
            failure.set(Some(e));
            f64::NAN
        }
    };
    let root = roots::bisect(f, -300.0, b.ln());
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let s = root?.exp().min(b);
    let kinetic = osc.g * s * s - 2.0 * mu * osc.nl.primitive(s);
    Ok((s, sign * kinetic.max(0.0).sqrt()))
}

/// `p1 ∈ (a_{n1}, b_{n1})` on the high-phase level line through `(p0, 0)`.
pub fn p1_of_p0<N: Nonlinearity>(osc: &Oscillator<N>, n1: f64, p0: f64) -> Result<f64> {
    let m1star = osc.m1star()?;
    if !(n1 > m1star) {
        return Err(Error::InvalidRegime(format!(
            "p1 needs n1 > m1* = {m1star}, got n1 = {n1}"
        )));
    }
    let (center, _) = osc.equilibria(n1)?;
    let level = osc.energy(n1, p0, 0.0);
    let floor = osc.energy(n1, center, 0.0);
    if !(p0 > 0.0 && p0 < center) || !(level > floor && level < 0.0) {
        return Err(Error::EnergyOutOfBand {
            energy: level,
            lo: floor,
            hi: 0.0,
        });
    }
    conjugate_turning_point(osc, n1, p0)
}

/// The largest anchor `p̌0` below which the low-phase transit to `x = a`
/// outlasts half the low phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitBound {
    pub p_check0: f64,
    /// Whether `σ0(·, a)` decreased across the sampling grid.
    pub monotone: bool,
}

pub fn p_check0(params: &ModelParams) -> Result<TransitBound> {
    let osc = params.oscillator();
    let n0 = params.n0;
    let a = params.a;
    let half = 0.5 * params.low_phase();
    let m0star = osc.m0star();
    if !(n0 < m0star) {
        return Err(Error::InvalidRegime(format!(
            "p_check0 needs n0 < m0* = {m0star}, got n0 = {n0}"
        )));
    }
    let (_, theta) = osc.lambda_theta();
    // the lower sandwich bound guarantees the inequality below this anchor
    let floor = a / (half * (params.g + n0 * theta).sqrt()).cosh();
    let top = a * (1.0 - 1e-12);
    let excess = |p: f64| sigma(&osc, n0, p, a).map(|s| s - half);
    if floor >= top || excess(top)? > 0.0 {
        return Ok(TransitBound {
            p_check0: a,
            monotone: true,
        });
    }

    let grid = 32;
    let mut monotone = true;
    let mut last = f64::INFINITY;
    for i in 0..grid {
        let p = floor + (top - floor) * i as f64 / grid as f64;
        let s = excess(p)?;
        if s >= last {
            monotone = false;
        }
        last = s;
    }
    let f_floor = excess(floor)?;
    if f_floor < 0.0 {
        return Err(Error::NoGap(format!(
            "sigma0({floor}, a) falls short of half the low phase {half}"
        )));
    }
    // root finding on a Result-valued function: record failure and bail
    let failure = std::cell::Cell::new(None);
    let f = |p: f64| match excess(p) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            f64::NAN
        }
    };
    let root = roots::bisect(f, floor, top);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(TransitBound {
        p_check0: root?,
        monotone,
    })
}

/// Both forms of the low-phase crossing inequality for the W anchor `p0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCrossing {
    pub p1: f64,
    pub b_n1: f64,
    pub half_low_phase: f64,
    /// `σ0(p1, b_{n1})`.
    pub transit: f64,
    /// `σ0(p1, b_{n1}) < (β − α)/2`.
    pub direct: bool,
    pub direct_margin: f64,
    pub kappa: f64,
    /// `p1 > b_{n1}/κ`, sufficient for the direct inequality.
    pub sufficient: bool,
    pub sufficient_margin: f64,
}

pub fn check_gap_crossing(params: &ModelParams, p0: f64) -> Result<GapCrossing> {
    let osc = params.oscillator();
    let p1 = p1_of_p0(&osc, params.n1, p0)?;
    let b_n1 = osc.b_mu(params.n1)?;
    let half = 0.5 * params.low_phase();
    let transit = sigma(&osc, params.n0, p1, b_n1)?;
    let kappa = kappa(params)?;
    let bound = b_n1 / kappa;
    Ok(GapCrossing {
        p1,
        b_n1,
        half_low_phase: half,
        transit,
        direct: transit < half,
        direct_margin: half - transit,
        kappa,
        sufficient: p1 > bound,
        sufficient_margin: p1 - bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Cubic;

    fn osc(g: f64, a: f64) -> Oscillator<Cubic> {
        Oscillator::new(g, Cubic::new(a))
    }

    #[test]
    fn sigma_inside_sandwich() {
        let o = osc(0.5, 0.4);
        let s = sigma(&o, 0.8, 0.07, 0.4).unwrap();
        let (lo, hi) = sigma_bounds(&o, 0.8, 0.07, 0.4).unwrap();
        assert!((lo - 2.682).abs() < 1e-3 && (hi - 3.712).abs() < 1e-3);
        assert!(lo < s && s < hi, "{lo} < {s} < {hi}");
    }

    #[test]
    fn sigma_linear_limit() {
        // F-term vanishes: σ = cosh⁻¹(ξ/p0)/√g
        let o = osc(0.1, 0.4);
        let s = sigma(&o, 1e-12, 0.07, 0.4).unwrap();
        let exact = (0.4f64 / 0.07).acosh() / 0.1f64.sqrt();
        assert!((s - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn sigma_errors() {
        let o = osc(0.1, 0.4);
        assert!(matches!(
            sigma(&o, 2.0, 0.07, 0.4),
            Err(Error::InvalidRegime(_))
        ));
        assert!(matches!(
            sigma(&o, 0.5, 0.4, 0.07),
            Err(Error::OutOfRange { .. })
        ));
        let tiny = sigma(&o, 0.5, 0.07, 0.07 + 1e-10).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-3);
    }

    #[test]
    fn tau_turning_point_on_level() {
        let o = osc(0.1, 0.4);
        let (period, x1) = tau(&o, 10.0, 0.07).unwrap();
        assert!(x1 > 0.417_157_3 && x1 < 0.707_255_7);
        assert!((o.energy(10.0, x1, 0.0) + 0.008_504_36).abs() < 1e-8);
        assert!(period.is_finite() && period > 0.0);
    }

    #[test]
    fn tau_center_limit() {
        let o = osc(0.1, 0.4);
        let (center, _) = o.equilibria(10.0).unwrap();
        let omega = (10.0 * o.nl.slope(center) - 0.1).sqrt();
        let (period, _) = tau(&o, 10.0, center - 1e-4).unwrap();
        assert!((period - 2.0 * std::f64::consts::PI / omega).abs() < 1e-3);
    }

    #[test]
    fn tau_errors() {
        let o = osc(0.1, 0.4);
        assert!(matches!(tau(&o, 2.0, 0.07), Err(Error::InvalidRegime(_))));
        assert!(matches!(tau(&o, 10.0, -0.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(tau(&o, 10.0, 0.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn tau_limit_is_finite() {
        let o = osc(0.1, 0.4);
        let l = tau_limit(&o, 0.07).unwrap();
        assert!(l.is_finite() && l > 0.0);
        assert!(matches!(tau_limit(&o, 0.4), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn p1_examples() {
        let o = osc(0.1, 0.4);
        let p1 = p1_of_p0(&o, 10.0, 0.07).unwrap();
        assert!(p1 > 0.417_157_3 && p1 < 0.707_255_7);
        assert!((o.energy(10.0, p1, 0.0) - o.energy(10.0, 0.07, 0.0)).abs() < 1e-10);
        let near = p1_of_p0(&o, 10.0, 1e-4).unwrap();
        assert!((near - o.b_mu(10.0).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn p_check0_solves_equality() {
        let p = ModelParams::new(0.1, 0.4, 0.5, 200.0, 4.0, 6.0).unwrap();
        let b = p_check0(&p).unwrap();
        assert!(b.monotone);
        assert!(b.p_check0 > 0.0 && b.p_check0 < 0.4);
        let s = sigma(&p.oscillator(), 0.5, b.p_check0, 0.4).unwrap();
        assert!((s - 1.0).abs() < 1e-8);
        let floor = 0.4 / (1.0 * (0.1f64 + 0.5 * 0.4).sqrt()).cosh();
        assert!(b.p_check0 >= floor);
    }

    #[test]
    fn p_check0_vanishing_low_phase() {
        let p = ModelParams::new(0.1, 0.4, 0.5, 200.0, 4.0, 4.0 + 1e-14).unwrap();
        let b = p_check0(&p).unwrap();
        assert!(b.p_check0 > 0.399);
    }
}
