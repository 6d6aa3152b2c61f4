//! Integration of the autonomous oscillators and of the switched system,
//! with event extraction, the period maps and the rotation angle about the
//! high-phase center.
//!
//! All flows use the clamped extension of `F`, so every solution exists for
//! all time; the clamp is inactive on orbits confined to `0 < x < 1`.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::nonlinearity::{Clamped, Cubic};
use crate::ode::{self, Control, Step, Tolerances};
use crate::roots;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn reflect(&self) -> Self {
        Self {
            x: self.x,
            y: -self.y,
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn array(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

impl From<[f64; 2]> for PhaseState {
    fn from(v: [f64; 2]) -> Self {
        Self { x: v[0], y: v[1] }
    }
}

/// Vector field `(y, g x − μ F(x))` of the clamped oscillator.
#[derive(Debug, Clone, Copy)]
pub struct Field {
    pub g: f64,
    pub mu: f64,
    pub nl: Clamped<Cubic>,
}

impl Field {
    pub fn new(g: f64, a: f64, mu: f64) -> Self {
        Self {
            g,
            mu,
            nl: Clamped::new(Cubic::new(a)),
        }
    }

    pub fn accel(&self, x: f64) -> f64 {
        self.g * x - self.mu * self.nl.value(x)
    }

    pub fn rhs(&self, z: &[f64; 2]) -> [f64; 2] {
        [z[1], self.accel(z[0])]
    }

    pub fn energy(&self, x: f64, y: f64) -> f64 {
        0.5 * y * y - 0.5 * self.g * x * x + self.mu * self.nl.primitive(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// `y` crosses zero downward: strict maximum of `x`.
    Maximum,
    /// `y` crosses zero upward: strict minimum of `x`.
    Minimum,
    /// The weight switches.
    Switch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub x: f64,
    /// `y′` at the event; zero for switches.
    pub slope: f64,
}

/// A dense-output node: time, state and slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
}

/// One autonomous stretch of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub mu: f64,
    pub nodes: Vec<Node>,
    pub energy0: f64,
    pub max_energy_drift: f64,
}

impl Segment {
    fn interpolate(&self, t: f64) -> PhaseState {
        let i = match self.nodes.binary_search_by(|n| n.t.total_cmp(&t)) {
            Ok(i) => return PhaseState::new(self.nodes[i].x, self.nodes[i].y),
            Err(i) => i.clamp(1, self.nodes.len() - 1),
        };
        let (a, b) = (&self.nodes[i - 1], &self.nodes[i]);
        let step = Step {
            t0: a.t,
            t1: b.t,
            y0: [a.x, a.y],
            y1: [b.x, b.y],
            f0: [a.dx, a.dy],
            f1: [b.dx, b.dy],
        };
        step.eval(t).into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub g: f64,
    pub a: f64,
    /// `(n0, n1)` used for the energy columns of exports.
    pub weights: (f64, f64),
    pub segments: Vec<Segment>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn span(&self) -> (f64, f64) {
        (
            self.segments.first().map_or(0.0, |s| s.t0),
            self.segments.last().map_or(0.0, |s| s.t1),
        )
    }

    pub fn start(&self) -> PhaseState {
        let n = &self.segments[0].nodes[0];
        PhaseState::new(n.x, n.y)
    }

    pub fn end(&self) -> PhaseState {
        let n = self.segments.last().unwrap().nodes.last().unwrap();
        PhaseState::new(n.x, n.y)
    }

    /// Dense output at `t` (clamped to the span).
    pub fn state_at(&self, t: f64) -> PhaseState {
        let idx = self.segments.partition_point(|s| s.t0 <= t).max(1) - 1;
        self.segments[idx].interpolate(t)
    }

    /// Largest per-segment energy drift divided by the segment length.
    pub fn energy_drift_rate(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.max_energy_drift / (s.t1 - s.t0).abs().max(1e-300))
            .fold(0.0, f64::max)
    }

    pub fn extrema(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind != EventKind::Switch)
    }

    /// CSV with columns `t,x,y,n,E0,E1`, one row per dense-output node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (n0, n1) = self.weights;
        let e0 = Field::new(self.g, self.a, n0);
        let e1 = Field::new(self.g, self.a, n1);
        writeln!(w, "t,x,y,n,E0,E1")?;
        for seg in &self.segments {
            for n in &seg.nodes {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    n.t,
                    n.x,
                    n.y,
                    seg.mu,
                    e0.energy(n.x, n.y),
                    e1.energy(n.x, n.y)
                )?;
            }
        }
        Ok(())
    }
}

/// Events strictly closer than this to the end of a counting window belong
/// to the next window.
pub const EVENT_WINDOW_TOL: f64 = 1e-7;
/// Crossings slower than this are tangential contacts.
pub const STRICTNESS_SLOPE: f64 = 1e-12;

/// Strict maxima and minima of `x` with event time in
/// `[t0 − tol, t1 − tol)`, `tol` = [`EVENT_WINDOW_TOL`].
pub fn count_extrema(traj: &Trajectory, t0: f64, t1: f64) -> Result<(usize, usize)> {
    let mut maxima = 0;
    let mut minima = 0;
    for e in traj.extrema() {
        if e.t < t0 - EVENT_WINDOW_TOL || e.t >= t1 - EVENT_WINDOW_TOL {
            continue;
        }
        if e.slope.abs() < STRICTNESS_SLOPE {
            return Err(Error::DegenerateCrossing {
                t: e.t,
                slope: e.slope,
            });
        }
        match e.kind {
            EventKind::Maximum => maxima += 1,
            EventKind::Minimum => minima += 1,
            EventKind::Switch => {}
        }
    }
    Ok((maxima, minima))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confinement {
    pub inf_x: f64,
    pub sup_x: f64,
    pub confined: bool,
    pub first_exit: Option<f64>,
}

/// Samples `x` at resolution `1e−3` plus every extremum and reports whether
/// `0 < x < 1` throughout.
pub fn confinement_check(traj: &Trajectory) -> Confinement {
    let mut inf_x = f64::INFINITY;
    let mut sup_x = f64::NEG_INFINITY;
    let mut first_exit: Option<f64> = None;
    let mut visit = |t: f64, x: f64| {
        inf_x = inf_x.min(x);
        sup_x = sup_x.max(x);
        if first_exit.is_none() && !(x > 0.0 && x < 1.0) {
            first_exit = Some(t);
        }
    };
    for seg in &traj.segments {
        for w in seg.nodes.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let k = ((b.t - a.t).abs() / 1e-3).ceil().max(1.0) as usize;
            let step = Step {
                t0: a.t,
                t1: b.t,
                y0: [a.x, a.y],
                y1: [b.x, b.y],
                f0: [a.dx, a.dy],
                f1: [b.dx, b.dy],
            };
            for i in 0..k {
                let t = a.t + (b.t - a.t) * i as f64 / k as f64;
                visit(t, step.eval(t)[0]);
            }
        }
        if let Some(last) = seg.nodes.last() {
            visit(last.t, last.x);
        }
    }
    for e in traj.extrema() {
        visit(e.t, e.x);
    }
    Confinement {
        inf_x,
        sup_x,
        confined: first_exit.is_none(),
        first_exit,
    }
}

/// Integration engine for one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct Flow {
    pub params: ModelParams,
    pub tol: Tolerances,
}

impl Flow {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            tol: Tolerances::default(),
        }
    }

    pub fn with_tolerances(params: ModelParams, tol: Tolerances) -> Self {
        Self { params, tol }
    }

    pub fn field(&self, mu: f64) -> Field {
        Field::new(self.params.g, self.params.a, mu)
    }

    /// High-phase center `a_{n1}`, the rotation center of the angle.
    pub fn high_center(&self) -> Result<f64> {
        Ok(self.params.oscillator().equilibria(self.params.n1)?.0)
    }

    /// State after time `dt` (negative for backward) of the weight-`μ`
    /// oscillator, without recording.
    pub fn advance(&self, mu: f64, z: PhaseState, dt: f64) -> Result<PhaseState> {
        let field = self.field(mu);
        let f = |s: &[f64; 2]| field.rhs(s);
        let (_, end) = ode::integrate(&f, 0.0, z.array(), dt, &self.tol, |_| Control::Continue)?;
        Ok(end.into())
    }

    /// High-phase map over `[0, α]`.
    pub fn psi1(&self, z: PhaseState) -> Result<PhaseState> {
        self.advance(self.params.n1, z, self.params.alpha)
    }

    /// Low-phase map over `[α, β]`.
    pub fn psi0(&self, z: PhaseState) -> Result<PhaseState> {
        self.advance(self.params.n0, z, self.params.low_phase())
    }

    /// Period map of the switched system.
    pub fn poincare(&self, z: PhaseState) -> Result<PhaseState> {
        self.psi0(self.psi1(z)?)
    }

    /// `ψ1(z)` together with the continuous angle `θ(α, z)` about
    /// `(a_{n1}, 0)`, started at `atan2(y, x − a_{n1})`.
    pub fn psi1_with_angle(&self, z: PhaseState) -> Result<(PhaseState, f64)> {
        let center = self.high_center()?;
        let theta0 = z.y.atan2(z.x - center);
        let (w, turn) = self.high_phase_turn(z, self.params.alpha)?;
        Ok((w, theta0 + turn))
    }

    /// State after time `dt` of the high-phase flow and the signed angle
    /// swept about `(a_{n1}, 0)`.
    pub fn high_phase_turn(&self, z: PhaseState, dt: f64) -> Result<(PhaseState, f64)> {
        let center = self.high_center()?;
        let field = self.field(self.params.n1);
        let f = |s: &[f64; 3]| {
            let dx = s[1];
            let dy = field.accel(s[0]);
            let u = s[0] - center;
            let r2 = u * u + s[1] * s[1];
            [dx, dy, (u * dy - s[1] * dx) / r2]
        };
        let mut singular: Option<(f64, f64)> = None;
        let r2_start = (z.x - center).powi(2) + z.y * z.y;
        if r2_start < CENTER_RADIUS * CENTER_RADIUS {
            return Err(Error::CenterSingularity {
                t: 0.0,
                distance: r2_start.sqrt(),
            });
        }
        let (_, end) = ode::integrate(&f, 0.0, [z.x, z.y, 0.0], dt, &self.tol, |s| {
            let u = s.y1[0] - center;
            let r2 = u * u + s.y1[1] * s.y1[1];
            if r2 < CENTER_RADIUS * CENTER_RADIUS || !s.y1[2].is_finite() {
                singular = Some((s.t1, r2.sqrt()));
                Control::Stop
            } else {
                Control::Continue
            }
        })?;
        if let Some((t, distance)) = singular {
            return Err(Error::CenterSingularity { t, distance });
        }
        Ok((PhaseState::new(end[0], end[1]), end[2]))
    }

    /// State after time `dt` of the weight-`μ` flow with the Jacobian of
    /// the flow map, from the variational equation.
    pub fn advance_with_jacobian(
        &self,
        mu: f64,
        z: PhaseState,
        dt: f64,
    ) -> Result<(PhaseState, [[f64; 2]; 2])> {
        let field = self.field(mu);
        let f = |s: &[f64; 6]| {
            let k = self.params.g - mu * field.nl.slope(s[0]);
            // columns (s2, s3) and (s4, s5) of the Jacobian
            [s[1], field.accel(s[0]), s[3], k * s[2], s[5], k * s[4]]
        };
        let (_, end) = ode::integrate(
            &f,
            0.0,
            [z.x, z.y, 1.0, 0.0, 0.0, 1.0],
            dt,
            &self.tol,
            |_| Control::Continue,
        )?;
        Ok((
            PhaseState::new(end[0], end[1]),
            [[end[2], end[4]], [end[3], end[5]]],
        ))
    }

    pub fn theta_alpha(&self, z: PhaseState) -> Result<f64> {
        Ok(self.psi1_with_angle(z)?.1)
    }

    /// Recorded trajectory of the weight-`μ` oscillator over `[0, t_end]`.
    pub fn autonomous(&self, mu: f64, z0: PhaseState, t_end: f64) -> Result<Trajectory> {
        let mut traj = Trajectory {
            g: self.params.g,
            a: self.params.a,
            weights: (mu, mu),
            segments: Vec::new(),
            events: Vec::new(),
        };
        self.record_segment(&mut traj, mu, 0.0, z0, t_end)?;
        Ok(traj)
    }

    /// Recorded trajectory of the switched system over `[0, t_end]`,
    /// restarting exactly at every switching instant.
    pub fn switched(&self, z0: PhaseState, t_end: f64) -> Result<Trajectory> {
        let p = &self.params;
        let mut traj = Trajectory {
            g: p.g,
            a: p.a,
            weights: (p.n0, p.n1),
            segments: Vec::new(),
            events: Vec::new(),
        };
        let mut z = z0;
        let mut k = 0u64;
        loop {
            let base = k as f64 * p.beta;
            for (start, stop, mu) in [
                (base, base + p.alpha, p.n1),
                (base + p.alpha, base + p.beta, p.n0),
            ] {
                if start >= t_end {
                    return Ok(traj);
                }
                if start > 0.0 {
                    traj.events.push(Event {
                        t: start,
                        kind: EventKind::Switch,
                        x: z.x,
                        slope: 0.0,
                    });
                }
                z = self.record_segment(&mut traj, mu, start, z, stop.min(t_end))?;
            }
            k += 1;
        }
    }

    /// Recorded switched-system trajectory assembled from autonomous pieces
    /// `(t0, t1, μ, z0)`, each restarted at its own initial state. A switch
    /// event is recorded wherever the weight changes.
    pub fn piecewise(&self, pieces: &[(f64, f64, f64, PhaseState)]) -> Result<Trajectory> {
        let p = &self.params;
        let mut traj = Trajectory {
            g: p.g,
            a: p.a,
            weights: (p.n0, p.n1),
            segments: Vec::new(),
            events: Vec::new(),
        };
        let mut last_mu: Option<f64> = None;
        for &(t0, t1, mu, z0) in pieces {
            if last_mu.is_some_and(|m| m != mu) {
                traj.events.push(Event {
                    t: t0,
                    kind: EventKind::Switch,
                    x: z0.x,
                    slope: 0.0,
                });
            }
            self.record_segment(&mut traj, mu, t0, z0, t1)?;
            last_mu = Some(mu);
        }
        Ok(traj)
    }

    fn record_segment(
        &self,
        traj: &mut Trajectory,
        mu: f64,
        t0: f64,
        z0: PhaseState,
        t1: f64,
    ) -> Result<PhaseState> {
        let field = self.field(mu);
        let f = |s: &[f64; 2]| field.rhs(s);
        let energy0 = field.energy(z0.x, z0.y);
        let d0 = field.rhs(&z0.array());
        let mut seg = Segment {
            t0,
            t1,
            mu,
            nodes: vec![Node {
                t: t0,
                x: z0.x,
                y: z0.y,
                dx: d0[0],
                dy: d0[1],
            }],
            energy0,
            max_energy_drift: 0.0,
        };
        let first_segment = traj.segments.is_empty();
        // an initial state on the axis is an event at t0 in its own right
        let mut prev_positive = z0.y > 0.0;
        if first_segment && z0.y == 0.0 {
            let slope = d0[1];
            if slope != 0.0 {
                traj.events.push(Event {
                    t: t0,
                    kind: if slope < 0.0 {
                        EventKind::Maximum
                    } else {
                        EventKind::Minimum
                    },
                    x: z0.x,
                    slope,
                });
                prev_positive = slope > 0.0;
            }
        }
        let mut events = Vec::new();
        let mut failure = None;
        ode::integrate(&f, t0, z0.array(), t1, &self.tol, |s| {
            if let Err(e) = scan_step(&f, &field, s, &mut prev_positive, &mut events) {
                failure = Some(e);
                return Control::Stop;
            }
            seg.nodes.push(Node {
                t: s.t1,
                x: s.y1[0],
                y: s.y1[1],
                dx: s.f1[0],
                dy: s.f1[1],
            });
            let drift = (field.energy(s.y1[0], s.y1[1]) - energy0).abs();
            seg.max_energy_drift = seg.max_energy_drift.max(drift);
            Control::Continue
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        traj.events.extend(events);
        let last = *seg.nodes.last().unwrap();
        traj.segments.push(seg);
        Ok(PhaseState::new(last.x, last.y))
    }

    /// First time in `(0, t_max]` at which `section` changes sign along the
    /// weight-`μ` flow from `z0`, with the state there.
    pub fn first_section_crossing<S>(
        &self,
        mu: f64,
        z0: PhaseState,
        t_max: f64,
        section: S,
    ) -> Result<Option<(f64, PhaseState)>>
    where
        S: Fn(&PhaseState) -> f64,
    {
        let field = self.field(mu);
        let f = |s: &[f64; 2]| field.rhs(s);
        let mut found = None;
        ode::integrate(&f, 0.0, z0.array(), t_max, &self.tol, |s| {
            let v0 = section(&s.y0.into());
            let v1 = section(&s.y1.into());
            if v0 == 0.0 && s.t0 == 0.0 {
                if v1 != 0.0 {
                    return Control::Continue;
                }
            }
            if (v0 > 0.0) != (v1 > 0.0) || v1 == 0.0 {
                let g = |dt: f64| section(&ode::single_step(&f, &s.y0, dt).into());
                let dt = roots::bisect(g, 0.0, s.t1 - s.t0).unwrap_or(s.t1 - s.t0);
                found = Some((s.t0 + dt, ode::single_step(&f, &s.y0, dt).into()));
                return Control::Stop;
            }
            Control::Continue
        })?;
        Ok(found)
    }
}

/// Closest admissible approach to the rotation center.
pub const CENTER_RADIUS: f64 = 1e-10;

const HERMITE_PROBES: usize = 8;

/// Detects sign changes of `y` within an accepted step and localizes them by
/// re-stepping from the step start.
fn scan_step<F>(
    f: &F,
    field: &Field,
    s: &Step<2>,
    prev_positive: &mut bool,
    events: &mut Vec<Event>,
) -> Result<()>
where
    F: Fn(&[f64; 2]) -> [f64; 2],
{
    let h = s.t1 - s.t0;
    let mut lo = 0.0;
    for i in 1..=HERMITE_PROBES {
        let frac = i as f64 / HERMITE_PROBES as f64;
        let v = if i == HERMITE_PROBES {
            s.y1[1]
        } else {
            s.eval(s.t0 + frac * h)[1]
        };
        let positive = v > 0.0;
        if positive != *prev_positive && v != 0.0 {
            let hi = frac * h;
            let g = |dt: f64| ode::single_step(f, &s.y0, dt)[1];
            let dt = match roots::bisect(g, lo, hi) {
                Ok(dt) => dt,
                // dense output and re-step disagree on the bracket: fall back
                Err(_) => roots::bisect(|t| s.eval(s.t0 + t)[1], lo, hi).unwrap_or(hi),
            };
            let z = ode::single_step(f, &s.y0, dt);
            let slope = field.accel(z[0]);
            events.push(Event {
                t: s.t0 + dt,
                kind: if positive {
                    EventKind::Minimum
                } else {
                    EventKind::Maximum
                },
                x: z[0],
                slope,
            });
            *prev_positive = positive;
        }
        lo = frac * h;
    }
    Ok(())
}

/// Autonomous trajectory with default tolerances.
pub fn flow_autonomous(g: f64, a: f64, mu: f64, z0: PhaseState, t_end: f64) -> Result<Trajectory> {
    let params = ModelParams {
        g,
        a,
        n0: mu,
        n1: mu,
        alpha: 0.5 * t_end.abs().max(1.0),
        beta: t_end.abs().max(1.0),
    };
    Flow::new(params).autonomous(mu, z0, t_end)
}

pub fn flow_switched(params: &ModelParams, z0: PhaseState, t_end: f64) -> Result<Trajectory> {
    Flow::new(*params).switched(z0, t_end)
}

pub fn poincare_psi1(params: &ModelParams, z: PhaseState) -> Result<PhaseState> {
    Flow::new(*params).psi1(z)
}

pub fn poincare_psi0(params: &ModelParams, z: PhaseState) -> Result<PhaseState> {
    Flow::new(*params).psi0(z)
}

pub fn poincare(params: &ModelParams, z: PhaseState) -> Result<PhaseState> {
    Flow::new(*params).poincare(z)
}

pub fn theta_alpha(params: &ModelParams, z: PhaseState) -> Result<f64> {
    Flow::new(*params).theta_alpha(z)
}
