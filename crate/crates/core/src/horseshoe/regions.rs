//! The annulus `M¹_c`, its quadrant `N_c`, the band `W` and the oriented
//! rectangles `A` (upper) and `B` (lower) in energy coordinates.

use crate::error::{Error, Result};
use crate::flow::PhaseState;
use crate::model::{horseshoe_constants, ModelParams, Oscillator, Thresholds};
use crate::nonlinearity::{Cubic, Nonlinearity};
use crate::roots;
use crate::timemaps;

/// One of the two oriented rectangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rect {
    A,
    B,
}

impl Rect {
    pub fn name(&self) -> &'static str {
        match self {
            Rect::A => "A",
            Rect::B => "B",
        }
    }
}

/// Left and right sides of an oriented rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionOptions {
    /// Reject parameters outside `n0 < m0* < m2* < n1`.
    pub enforce_regime: bool,
    /// `μ̄` for the threshold constants; `None` for twice `m1*`.
    pub mu_bar: Option<f64>,
    /// Grid size of the inclusion check.
    pub inclusion_grid: usize,
}

impl Default for RegionOptions {
    fn default() -> Self {
        Self {
            enforce_regime: true,
            mu_bar: None,
            inclusion_grid: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    pub params: ModelParams,
    pub thresholds: Thresholds,
    pub p_check0: f64,
    /// `min(p̌0, p̂0)`.
    pub p_star: f64,
    pub pbar0: f64,
    pub p0: f64,
    pub p1: f64,
    /// Conjugate of `p̄0` across the well of `𝓕`.
    pub pbar0_plus: f64,
    /// Inner level `ℰ1(p̄0, 0)`.
    pub c: f64,
    pub a_n1: f64,
    pub b_n1: f64,
    /// `ℰ1(a_{n1}, 0)`.
    pub center_energy: f64,
    /// `ℰ0(p0, 0)`.
    pub e0_hi: f64,
    /// `ℰ0(p1, 0)`.
    pub e0_lo: f64,
    /// Smallest `ζ` on the inclusion grid.
    pub inclusion_margin: f64,
}

/// Default `W` anchor: the midpoint of `(p̄0, p*)`.
pub fn default_p0(params: &ModelParams, pbar0: f64, mu_bar: Option<f64>) -> Result<f64> {
    let (_, _, p_star) = anchor_bounds(params, mu_bar)?;
    Ok(0.5 * (pbar0 + p_star))
}

fn anchor_bounds(params: &ModelParams, mu_bar: Option<f64>) -> Result<(Thresholds, f64, f64)> {
    let mu_bar = match mu_bar {
        Some(m) => m,
        None => crate::model::default_mu_bar(params)?,
    };
    let t = horseshoe_constants(params, mu_bar)?;
    let p_check0 = timemaps::p_check0(params)?.p_check0;
    Ok((t, p_check0, p_check0.min(t.p_hat0)))
}

pub fn build_regions(
    params: &ModelParams,
    pbar0: f64,
    p0: f64,
    opts: &RegionOptions,
) -> Result<RegionSet> {
    params.validate()?;
    let osc = params.oscillator();
    osc.require_h0()?;
    let (thresholds, p_check0, p_star) = anchor_bounds(params, opts.mu_bar)?;
    if opts.enforce_regime {
        let t = &thresholds;
        if !(params.n0 < t.m0star && t.m0star < t.m2star && t.m2star < params.n1) {
            return Err(Error::RegimeViolation(format!(
                "need n0 < m0* < m2* < n1, have n0 = {}, m0* = {}, m2* = {}, n1 = {}",
                params.n0, t.m0star, t.m2star, params.n1
            )));
        }
    }
    if !(pbar0 > 0.0 && pbar0 < p0) {
        return Err(Error::AnchorOrderViolation(format!(
            "need 0 < pbar0 < p0, have pbar0 = {pbar0}, p0 = {p0}"
        )));
    }
    if opts.enforce_regime && !(p0 < p_star) {
        return Err(Error::AnchorOrderViolation(format!(
            "need p0 < p* = {p_star}, have p0 = {p0}"
        )));
    }
    let n1 = params.n1;
    let (a_n1, _) = osc.equilibria(n1)?;
    let b_n1 = osc.b_mu(n1)?;
    let p1 = timemaps::p1_of_p0(&osc, n1, p0)?;
    let pbar0_plus = osc.x_plus(pbar0)?;
    let mut regions = RegionSet {
        params: *params,
        thresholds,
        p_check0,
        p_star,
        pbar0,
        p0,
        p1,
        pbar0_plus,
        c: osc.energy(n1, pbar0, 0.0),
        a_n1,
        b_n1,
        center_energy: osc.energy(n1, a_n1, 0.0),
        e0_hi: osc.energy(params.n0, p0, 0.0),
        e0_lo: osc.energy(params.n0, p1, 0.0),
        inclusion_margin: f64::NAN,
    };
    let sep = regions.separation(opts.inclusion_grid.max(2));
    regions.inclusion_margin = sep.min_zeta;
    if opts.enforce_regime && !(sep.min_zeta > 0.0) {
        let x = sep.argmin;
        let y = (2.0 * (regions.e0_hi - regions.v0(x))).max(0.0).sqrt();
        return Err(Error::InclusionFailure { x, y });
    }
    Ok(regions)
}

/// The claim `ζ(x) = ζ1(x, p̄0) − ζ0(x, p0) > 0` on `[p0, a_{n1}]`, which
/// keeps the upper component of `M¹_c ∩ W` right of `x = a_{n1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    pub min_zeta: f64,
    pub argmin: f64,
    /// `½ g (p0² − p̄0²)`.
    pub floor: f64,
    pub holds: bool,
    pub pbar0_plus: f64,
    /// `a_{n1} ≤ p̄0⁺`, the sufficient condition.
    pub center_left_of_conjugate: bool,
}

pub fn check_separation_claim(params: &ModelParams, pbar0: f64, p0: f64) -> Result<Separation> {
    let opts = RegionOptions {
        enforce_regime: false,
        ..RegionOptions::default()
    };
    let regions = build_regions(params, pbar0, p0, &opts)?;
    Ok(regions.separation(1000))
}

impl RegionSet {
    fn osc(&self) -> Oscillator<Cubic> {
        self.params.oscillator()
    }

    /// `−½ g x² + n0 𝓕(x)`.
    pub fn v0(&self, x: f64) -> f64 {
        self.osc().energy(self.params.n0, x, 0.0)
    }

    /// `−½ g x² + n1 𝓕(x)`.
    pub fn v1(&self, x: f64) -> f64 {
        self.osc().energy(self.params.n1, x, 0.0)
    }

    pub fn e0(&self, z: &PhaseState) -> f64 {
        self.osc().energy(self.params.n0, z.x, z.y)
    }

    pub fn e1(&self, z: &PhaseState) -> f64 {
        self.osc().energy(self.params.n1, z.x, z.y)
    }

    pub fn zeta(&self, x: f64) -> f64 {
        (self.c - self.v1(x)) - (self.e0_hi - self.v0(x))
    }

    pub fn separation(&self, grid: usize) -> Separation {
        let (lo, hi) = (self.p0, self.a_n1);
        let mut min_zeta = f64::INFINITY;
        let mut argmin = lo;
        for i in 0..=grid {
            let x = lo + (hi - lo) * i as f64 / grid as f64;
            let z = self.zeta(x);
            if z < min_zeta {
                min_zeta = z;
                argmin = x;
            }
        }
        Separation {
            min_zeta,
            argmin,
            floor: 0.5 * self.params.g * (self.p0 * self.p0 - self.pbar0 * self.pbar0),
            holds: min_zeta > 0.0,
            pbar0_plus: self.pbar0_plus,
            center_left_of_conjugate: self.a_n1 <= self.pbar0_plus,
        }
    }

    /// A point of `M¹_c ∩ W` with `y ≥ 0` left of `x = a_{n1}`, searched on a
    /// `grid × grid` lattice of the energy rectangle; `None` certifies that
    /// the upper component lies in `N_c` at that resolution.
    pub fn left_branch_point(&self, grid: usize) -> Option<PhaseState> {
        let p = &self.params;
        let nl = Cubic::new(p.a);
        let grid = grid.max(2);
        for i in 0..grid {
            for k in 0..grid {
                let (e1, e0) = self.chart_energies(
                    Rect::A,
                    i as f64 / (grid - 1) as f64,
                    k as f64 / (grid - 1) as f64,
                );
                let target = (e1 - e0) / (p.n1 - p.n0);
                let f = |s: f64| nl.primitive(s) - target;
                // 𝓕 decreases on (0, a) and increases on (a, a_{n1})
                for (lo, hi) in [(0.0, p.a), (p.a, self.a_n1)] {
                    if let Ok(x) = roots::bisect(f, lo, hi) {
                        let y2 = 2.0 * (e1 - self.v1(x));
                        if y2 >= 0.0 && x < self.a_n1 {
                            return Some(PhaseState::new(x, y2.sqrt()));
                        }
                    }
                }
            }
        }
        None
    }

    pub fn in_m1c(&self, z: &PhaseState) -> bool {
        let e = self.e1(z);
        (0.0..=1.0).contains(&z.x) && self.c <= e && e <= 0.0
    }

    pub fn in_n_c(&self, z: &PhaseState) -> bool {
        self.in_m1c(z) && z.x >= self.a_n1 && z.y >= 0.0
    }

    pub fn in_w(&self, z: &PhaseState) -> bool {
        let e = self.e0(z);
        (0.0..=1.0).contains(&z.x) && self.e0_lo <= e && e <= self.e0_hi
    }

    pub fn contains(&self, rect: Rect, z: &PhaseState) -> bool {
        let (e1, e0) = (self.e1(z), self.e0(z));
        let band = self.c <= e1 && e1 <= 0.0 && self.e0_lo <= e0 && e0 <= self.e0_hi;
        let quadrant = match rect {
            Rect::A => z.y >= 0.0,
            Rect::B => z.y <= 0.0,
        };
        band && quadrant && z.x >= self.a_n1
    }

    /// The energy held constant on a side: `ℰ1` for `A`, `ℰ0` for `B`.
    pub fn side_level(&self, rect: Rect, side: Side) -> f64 {
        match (rect, side) {
            (Rect::A, Side::Left) => self.c,
            (Rect::A, Side::Right) => 0.0,
            (Rect::B, Side::Left) => self.e0_hi,
            (Rect::B, Side::Right) => self.e0_lo,
        }
    }

    /// Position across the rectangle: 0 on the left side, 1 on the right.
    pub fn across(&self, rect: Rect, z: &PhaseState) -> f64 {
        let (l, r) = (
            self.side_level(rect, Side::Left),
            self.side_level(rect, Side::Right),
        );
        let e = match rect {
            Rect::A => self.e1(z),
            Rect::B => self.e0(z),
        };
        (e - l) / (r - l)
    }

    /// Transverse chart coordinate: for `A` the ℰ0 fraction from `e0_lo`,
    /// for `B` the ℰ1 fraction from `0` towards `c`.
    pub fn transverse(&self, rect: Rect, z: &PhaseState) -> f64 {
        match rect {
            Rect::A => (self.e0(z) - self.e0_lo) / (self.e0_hi - self.e0_lo),
            Rect::B => 1.0 - self.e1(z) / self.c,
        }
    }

    /// Energy gap between the two sides.
    pub fn side_gap(&self, rect: Rect) -> f64 {
        (self.side_level(rect, Side::Right) - self.side_level(rect, Side::Left)).abs()
    }

    /// Slack of the constraints other than the side coordinate, in energy
    /// units (for `x`, `y` in phase units); negative when violated.
    pub fn transverse_slack(&self, rect: Rect, z: &PhaseState) -> f64 {
        let (band, quadrant) = match rect {
            Rect::A => {
                let e0 = self.e0(z);
                ((e0 - self.e0_lo).min(self.e0_hi - e0), z.y)
            }
            Rect::B => {
                let e1 = self.e1(z);
                ((e1 - self.c).min(-e1), -z.y)
            }
        };
        band.min(quadrant).min(z.x - self.a_n1)
    }

    /// The point of rectangle `rect` with energies `(ℰ1, ℰ0)`.
    pub fn chart_point(&self, rect: Rect, e1: f64, e0: f64) -> Result<PhaseState> {
        let fail = |reason: String| Error::ChartInversionFailure { e1, e0, reason };
        let p = &self.params;
        let nl = Cubic::new(p.a);
        // ℰ1 − ℰ0 = (n1 − n0) 𝓕(x); 𝓕 increases on (a, 1)
        let target = (e1 - e0) / (p.n1 - p.n0);
        let (lo, hi) = (p.a, 1.0);
        if !(target >= nl.primitive(lo) && target <= nl.primitive(hi)) {
            return Err(fail(format!(
                "primitive level {target:e} outside the range on [a, 1]"
            )));
        }
        let x = roots::bracketed(
            |s| nl.primitive(s) - target,
            Some(|s: f64| nl.value(s)),
            lo,
            hi,
        )
        .map_err(|e| fail(e.to_string()))?;
        if x < self.a_n1 {
            return Err(fail(format!("x = {x} left of the center {}", self.a_n1)));
        }
        let y2 = 2.0 * (e1 - self.v1(x));
        if y2 < -1e-14 {
            return Err(fail(format!("negative kinetic energy {y2:e}")));
        }
        let y = y2.max(0.0).sqrt();
        Ok(PhaseState::new(x, if rect == Rect::A { y } else { -y }))
    }

    /// Energies `(ℰ1, ℰ0)` of the point at across-coordinate `u` and
    /// transverse profile `v`, both in `[0, 1]`.
    pub fn chart_energies(&self, rect: Rect, u: f64, v: f64) -> (f64, f64) {
        match rect {
            Rect::A => (self.c * (1.0 - u), v * self.e0_hi + (1.0 - v) * self.e0_lo),
            Rect::B => (
                self.c * (1.0 - v),
                self.e0_hi + u * (self.e0_lo - self.e0_hi),
            ),
        }
    }

    /// Point at chart coordinates `(u, v)`; see [`Self::chart_energies`].
    pub fn chart(&self, rect: Rect, u: f64, v: f64) -> Result<PhaseState> {
        let (e1, e0) = self.chart_energies(rect, u, v);
        self.chart_point(rect, e1, e0)
    }

    /// Points along one side, equispaced in the transverse energy.
    pub fn side_arc(&self, rect: Rect, side: Side, n: usize) -> Result<Vec<PhaseState>> {
        let u = if side == Side::Left { 0.0 } else { 1.0 };
        (0..n.max(2))
            .map(|i| self.chart(rect, u, i as f64 / (n.max(2) - 1) as f64))
            .collect()
    }

    /// Boundary trace of a rectangle: left side, top, right side reversed,
    /// bottom, closed.
    pub fn boundary(&self, rect: Rect, n: usize) -> Result<Vec<PhaseState>> {
        let n = n.max(2);
        let s = |i: usize| i as f64 / (n - 1) as f64;
        let mut out = Vec::with_capacity(4 * n + 1);
        for i in 0..n {
            out.push(self.chart(rect, 0.0, s(i))?);
        }
        for i in 0..n {
            out.push(self.chart(rect, s(i), 1.0)?);
        }
        for i in 0..n {
            out.push(self.chart(rect, 1.0, 1.0 - s(i))?);
        }
        for i in 0..n {
            out.push(self.chart(rect, 1.0 - s(i), 0.0)?);
        }
        out.push(out[0]);
        Ok(out)
    }
}

/// A crossing path of a rectangle from its left to its right side at fixed
/// transverse profile.
#[derive(Debug, Clone, Copy)]
pub struct CrossingPath<'a> {
    pub regions: &'a RegionSet,
    pub rect: Rect,
    pub profile: f64,
}

/// Decay rate of the `A` path grading.
pub const PATH_GRADING: f64 = 30.0;

impl CrossingPath<'_> {
    /// Across-coordinate at path parameter `t`. Paths of `A` are graded so
    /// that `1 − u` decays exponentially towards the homoclinic side, where
    /// the rotation angle changes on exponentially small scales.
    pub fn across(&self, t: f64) -> f64 {
        match self.rect {
            Rect::A => 1.0 - (1.0 - t) * (-PATH_GRADING * t).exp(),
            Rect::B => t,
        }
    }

    pub fn point(&self, t: f64) -> Result<PhaseState> {
        self.regions.chart(self.rect, self.across(t), self.profile)
    }
}

/// `n_points` points of the crossing path of `A` at transverse profile
/// `profile` (0 on the `ℰ0 = e0_lo` edge, 1 on `ℰ0 = e0_hi`).
pub fn sample_crossing_path(
    regions: &RegionSet,
    profile: f64,
    n_points: usize,
) -> Result<Vec<PhaseState>> {
    let path = CrossingPath {
        regions,
        rect: Rect::A,
        profile,
    };
    let n = n_points.max(2);
    (0..n)
        .map(|i| path.point(i as f64 / (n - 1) as f64))
        .collect()
}
