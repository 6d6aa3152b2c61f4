//! Orbits with prescribed symbol sequences.
//!
//! Periodic orbits and finite orbit segments are located by multiple
//! shooting: every high and low phase is cut into short segments whose
//! end states are the unknowns, so the defects stay well conditioned even
//! where the full period map expands by many orders of magnitude. Seeds come
//! from the composite strips of the stretching verifier. Found orbits are
//! checked block by block for maxima counts, low-phase convexity and
//! confinement.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{confinement_check, count_extrema, Confinement, Flow, PhaseState, Trajectory};
use crate::horseshoe::{composite_strip, symbol_of_angle, Rect, RegionSet, StretchOptions, Strip};
use crate::model::ModelParams;
use crate::nonlinearity::Nonlinearity;
use crate::ode::Tolerances;

/// A finite block of symbols in `1..=p`; as a periodic itinerary it stands
/// for its infinite repetition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Itinerary {
    symbols: Vec<usize>,
    p_symbols: usize,
}

impl Itinerary {
    pub fn new(symbols: Vec<usize>, p_symbols: usize) -> Result<Self> {
        if p_symbols < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 symbols, have {p_symbols}"
            )));
        }
        if symbols.is_empty() {
            return Err(Error::InvalidParams("empty itinerary".into()));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s == 0 || s > p_symbols) {
            return Err(Error::InvalidParams(format!(
                "symbol {s} outside 1..={p_symbols}"
            )));
        }
        Ok(Self { symbols, p_symbols })
    }

    /// Parses `"1,2,1"`, `"(1, 2)"` or `"1 2"`.
    pub fn parse(text: &str, p_symbols: usize) -> Result<Self> {
        let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
        let symbols = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::InvalidParams(format!("bad symbol {s:?} in {text:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(symbols, p_symbols)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn p_symbols(&self) -> usize {
        self.p_symbols
    }

    /// Symbol of block `k`, indices taken cyclically.
    pub fn symbol(&self, k: usize) -> usize {
        self.symbols[k % self.symbols.len()]
    }

    /// The block rotated left by `k`.
    pub fn shifted(&self, k: usize) -> Self {
        let mut symbols = self.symbols.clone();
        symbols.rotate_left(k % self.symbols.len());
        Self {
            symbols,
            p_symbols: self.p_symbols,
        }
    }

    pub fn is_rotation_of(&self, other: &Self) -> bool {
        self.len() == other.len() && (0..self.len()).any(|k| &self.shifted(k) == other)
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.symbols.iter().map(|s| s.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Maxima and minima of `x` in a high phase carrying symbol `j`.
pub fn expected_extrema(symbol: usize) -> (usize, usize) {
    (symbol + 1, symbol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Largest admissible shooting defect.
    pub tol: f64,
    pub flow_tol: Tolerances,
    /// Longest shooting segment in the high phase.
    pub high_segment: f64,
    /// Longest shooting segment in the low phase.
    pub low_segment: f64,
    pub max_newton: usize,
    /// Seed profiles tried before giving up.
    pub seeds: usize,
    /// Profile-update sweeps per seed.
    pub seed_sweeps: usize,
    pub stretch: StretchOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            flow_tol: Tolerances {
                rtol: 1e-12,
                atol: 1e-14,
                h_max: 0.05,
            },
            high_segment: 0.25,
            low_segment: 1.0,
            max_newton: 40,
            seeds: 5,
            seed_sweeps: 6,
            stretch: StretchOptions {
                paths: 1,
                refine_tol: 1e-13,
                initial_samples: 65,
                max_depth: 16,
            },
        }
    }
}

/// Start of one shooting segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingNode {
    pub t: f64,
    pub dt: f64,
    pub mu: f64,
    pub z: PhaseState,
}

/// Segment starts for `blocks` consecutive periods from time zero.
fn layout(params: &ModelParams, blocks: usize, opts: &SearchOptions) -> Vec<(f64, f64, f64)> {
    let nh = (params.alpha / opts.high_segment).ceil().max(1.0) as usize;
    let low = params.low_phase();
    let nl = (low / opts.low_segment).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(blocks * (nh + nl));
    for k in 0..blocks {
        let base = k as f64 * params.beta;
        for i in 0..nh {
            let dt = params.alpha / nh as f64;
            out.push((base + i as f64 * dt, dt, params.n1));
        }
        for i in 0..nl {
            let dt = low / nl as f64;
            out.push((base + params.alpha + i as f64 * dt, dt, params.n0));
        }
    }
    out
}

fn segments_per_block(params: &ModelParams, opts: &SearchOptions) -> usize {
    layout(params, 1, opts).len()
}

/// Nodes along the trajectories of `anchors`, one block each.
fn nodes_from_anchors(
    flow: &Flow,
    anchors: &[PhaseState],
    opts: &SearchOptions,
) -> Result<Vec<ShootingNode>> {
    let plan = layout(&flow.params, anchors.len(), opts);
    let per = segments_per_block(&flow.params, opts);
    let mut nodes = Vec::with_capacity(plan.len());
    for (k, &w) in anchors.iter().enumerate() {
        let mut z = w;
        for &(t, dt, mu) in &plan[k * per..(k + 1) * per] {
            nodes.push(ShootingNode { t, dt, mu, z });
            z = flow.advance(mu, z, dt)?;
        }
    }
    Ok(nodes)
}

/// Defects `φ_i(z_i) − z_{i+1}` of consecutive nodes; the last node maps to
/// the first when `closed`, and has no equation otherwise.
fn defects(flow: &Flow, nodes: &[ShootingNode], closed: bool) -> Result<Vec<[f64; 2]>> {
    let n = nodes.len();
    let count = if closed { n } else { n - 1 };
    (0..count)
        .into_par_iter()
        .map(|i| {
            let node = &nodes[i];
            let end = flow.advance(node.mu, node.z, node.dt)?;
            let next = nodes[(i + 1) % n].z;
            Ok([end.x - next.x, end.y - next.y])
        })
        .collect()
}

fn max_norm(r: &[[f64; 2]]) -> f64 {
    r.iter().flat_map(|d| d.iter()).fold(
        0.0,
        |m: f64, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) },
    )
}

/// Damped Newton on the shooting defects. Returns the final largest defect
/// and the number of accepted steps.
fn polish(
    flow: &Flow,
    nodes: &mut [ShootingNode],
    closed: bool,
    opts: &SearchOptions,
) -> Result<(f64, usize)> {
    let n = nodes.len();
    let rows = if closed { n } else { n - 1 };
    let floor = opts.tol * 1e-4;
    let mut r = defects(flow, nodes, closed)?;
    let mut res = max_norm(&r);
    let mut steps = 0;
    while steps < opts.max_newton && res > floor {
        let jac: Vec<[[f64; 2]; 2]> = (0..rows)
            .into_par_iter()
            .map(|i| {
                let node = &nodes[i];
                Ok(flow.advance_with_jacobian(node.mu, node.z, node.dt)?.1)
            })
            .collect::<Result<_>>()?;
        let mut j = DMatrix::<f64>::zeros(2 * rows, 2 * n);
        let mut rhs = DVector::<f64>::zeros(2 * rows);
        for i in 0..rows {
            let next = (i + 1) % n;
            for a in 0..2 {
                for b in 0..2 {
                    j[(2 * i + a, 2 * i + b)] += jac[i][a][b];
                }
                j[(2 * i + a, 2 * next + a)] -= 1.0;
                rhs[2 * i + a] = -r[i][a];
            }
        }
        let delta = if closed {
            j.lu().solve(&rhs)
        } else {
            // least-norm correction of the underdetermined open chain
            let jt = j.transpose();
            (&j * &jt).lu().solve(&rhs).map(|y| jt * y)
        };
        let Some(delta) = delta else {
            return Err(Error::PolishDiverged("singular shooting Jacobian".into()));
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-3 {
            let trial: Vec<ShootingNode> = nodes
                .iter()
                .enumerate()
                .map(|(i, node)| ShootingNode {
                    z: PhaseState::new(
                        node.z.x + lambda * delta[2 * i],
                        node.z.y + lambda * delta[2 * i + 1],
                    ),
                    ..*node
                })
                .collect();
            if let Ok(tr) = defects(flow, &trial, closed) {
                let tres = max_norm(&tr);
                if tres < res {
                    nodes.copy_from_slice(&trial);
                    r = tr;
                    res = tres;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        steps += 1;
    }
    if !res.is_finite() {
        return Err(Error::PolishDiverged(format!("defect {res}")));
    }
    Ok((res, steps))
}

/// High-phase angle `θ(α)` of block `k`, summed over the shooting segments.
fn block_angle(flow: &Flow, nodes: &[ShootingNode], per: usize, k: usize) -> Result<f64> {
    let center = flow.high_center()?;
    let first = &nodes[k * per];
    let mut theta = first.z.y.atan2(first.z.x - center);
    for node in &nodes[k * per..(k + 1) * per] {
        if node.mu != flow.params.n1 {
            break;
        }
        theta += flow.high_phase_turn(node.z, node.dt)?.1;
    }
    Ok(theta)
}

/// Leading blocks whose anchors lie in the symbol sets `D_{i_k}`.
fn matched_depth(
    flow: &Flow,
    regions: &RegionSet,
    itinerary: &Itinerary,
    nodes: &[ShootingNode],
    blocks: usize,
    per: usize,
) -> Result<(usize, Vec<f64>)> {
    let mut angles = Vec::with_capacity(blocks);
    for k in 0..blocks {
        let anchor = nodes[k * per].z;
        let theta = block_angle(flow, nodes, per, k)?;
        angles.push(theta);
        let in_set = regions.contains(Rect::A, &anchor)
            && symbol_of_angle(theta, itinerary.p_symbols()) == Some(itinerary.symbol(k));
        if !in_set {
            return Ok((k, angles));
        }
    }
    Ok((blocks, angles))
}

/// Profiles tried as seeds: the middle first, then dyadic refinements.
fn seed_profiles(count: usize) -> Vec<f64> {
    let mut out = vec![0.5];
    let mut level = 2.0;
    while out.len() < count {
        let mut i = 1.0;
        while i < level && out.len() < count {
            let v = i / level;
            if !out.iter().any(|&w: &f64| (w - v).abs() < 1e-12) {
                out.push(v);
            }
            i += 2.0;
        }
        level *= 2.0;
    }
    out
}

/// Anchors whose composite images are aimed at the next anchor, from the
/// strips of the prescribed symbols. `last_target` is the across-coordinate
/// aimed at by the final block of an open chain; closed chains aim it at the
/// first anchor.
fn seed_anchors(
    flow: &Flow,
    regions: &RegionSet,
    itinerary: &Itinerary,
    blocks: usize,
    start_profile: f64,
    last_target: Option<f64>,
    opts: &SearchOptions,
) -> Result<Option<Vec<PhaseState>>> {
    let strips_for = |profiles: &[f64]| -> Result<Option<Vec<Strip<'_>>>> {
        let mut strips = Vec::with_capacity(blocks);
        for (k, &v) in profiles.iter().enumerate() {
            match composite_strip(regions, flow, itinerary.symbol(k), v, &opts.stretch)? {
                Some(s) => strips.push(s),
                None => return Ok(None),
            }
        }
        Ok(Some(strips))
    };
    let mut profiles = vec![start_profile; blocks];
    let mut anchors = Vec::new();
    for _ in 0..opts.seed_sweeps.max(1) {
        let Some(strips) = strips_for(&profiles)? else {
            return Ok(None);
        };
        let across: Vec<f64> = strips
            .iter()
            .map(|s| {
                let (t0, t1) = s.interval();
                Ok(regions.across(Rect::A, &s.point(0.5 * (t0 + t1))?))
            })
            .collect::<Result<_>>()?;
        anchors.clear();
        for k in 0..blocks {
            let target = match (k + 1 < blocks, last_target) {
                (true, _) => across[k + 1],
                (false, Some(u)) => u,
                (false, None) => across[0],
            };
            anchors.push(strips[k].point(strips[k].locate(target)?)?);
        }
        // move each profile to the transverse coordinate of the image aimed at it
        let mut change: f64 = 0.0;
        let mut next = profiles.clone();
        for k in 0..blocks {
            let to = if k + 1 < blocks {
                k + 1
            } else if last_target.is_none() {
                0
            } else {
                continue;
            };
            let image = flow.poincare(anchors[k])?;
            let v = regions.transverse(Rect::A, &image).clamp(0.0, 1.0);
            change = change.max((v - profiles[to]).abs());
            next[to] = v;
        }
        if change < 1e-3 {
            break;
        }
        profiles = next;
    }
    Ok(Some(anchors))
}

/// A periodic orbit of the switched system realizing a periodic itinerary.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub itinerary: Itinerary,
    pub params: ModelParams,
    /// States at the block starts `kβ`, `k = 0..m`.
    pub anchors: Vec<PhaseState>,
    pub nodes: Vec<ShootingNode>,
    /// Largest shooting defect.
    pub residual: f64,
    /// `‖ψᵐ(z) − z‖` from one uninterrupted integration of the anchor.
    pub single_shot_residual: f64,
    /// High-phase angle `θ(α)` of every block.
    pub angles: Vec<f64>,
    pub newton_steps: usize,
    /// Seed profile that led to convergence.
    pub seed_profile: f64,
}

impl PeriodicOrbit {
    pub fn multiplier(&self) -> usize {
        self.itinerary.len()
    }

    pub fn period(&self) -> f64 {
        self.multiplier() as f64 * self.params.beta
    }

    /// Pieces `(t0, t1, μ, z0)` of `periods` repetitions of the orbit.
    pub fn pieces(&self, periods: usize) -> Vec<(f64, f64, f64, PhaseState)> {
        (0..periods)
            .flat_map(|p| {
                let shift = p as f64 * self.period();
                self.nodes
                    .iter()
                    .map(move |n| (n.t + shift, n.t + n.dt + shift, n.mu, n.z))
            })
            .collect()
    }

    /// Trajectory over `periods` periods, restarted at every shooting node.
    pub fn trajectory(&self, flow: &Flow, periods: usize) -> Result<Trajectory> {
        flow.piecewise(&self.pieces(periods))
    }

    pub fn verify(&self, flow: &Flow, periods: usize) -> Result<ItineraryReport> {
        let traj = self.trajectory(flow, periods)?;
        Ok(verify_trajectory(
            &self.params,
            &traj,
            &self.itinerary,
            periods * self.multiplier(),
        ))
    }

    /// Smallest distance between the anchors of two orbits.
    pub fn distance_to(&self, other: &Self) -> f64 {
        self.anchors
            .iter()
            .flat_map(|a| other.anchors.iter().map(move |b| a.distance(b)))
            .fold(f64::INFINITY, f64::min)
    }

    /// One full period as CSV `t,x,y`.
    pub fn write_csv<W: Write>(&self, flow: &Flow, mut w: W) -> io::Result<()> {
        let traj = self
            .trajectory(flow, 1)
            .map_err(|e| io::Error::other(e.to_string()))?;
        writeln!(w, "t,x,y")?;
        for seg in &traj.segments {
            for n in &seg.nodes {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", n.t, n.x, n.y)?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("itinerary = {}\n", self.itinerary));
        s.push_str(&format!("period = {:.17e}\n", self.period()));
        s.push_str(&format!("residual = {:.17e}\n", self.residual));
        s.push_str(&format!(
            "single_shot_residual = {:.17e}\n",
            self.single_shot_residual
        ));
        s.push_str(&format!("newton_steps = {}\n", self.newton_steps));
        s.push_str(&format!("shooting_segments = {}\n", self.nodes.len()));
        s.push_str(&format!("seed_profile = {:.17e}\n", self.seed_profile));
        for (k, (a, th)) in self.anchors.iter().zip(&self.angles).enumerate() {
            s.push_str(&format!("anchor {k}\n"));
            s.push_str(&format!("  symbol = {}\n", self.itinerary.symbol(k)));
            s.push_str(&format!("  x = {:.17e}\n", a.x));
            s.push_str(&format!("  y = {:.17e}\n", a.y));
            s.push_str(&format!("  theta_alpha = {:.17e}\n", th));
        }
        s
    }
}

/// Periodic orbit of the switched system whose period map iterates visit
/// `D_{i_1}, …, D_{i_m}` in turn.
pub fn find_periodic(
    params: &ModelParams,
    regions: &RegionSet,
    itinerary: &Itinerary,
    opts: &SearchOptions,
) -> Result<PeriodicOrbit> {
    let flow = Flow::with_tolerances(*params, opts.flow_tol);
    let m = itinerary.len();
    let per = segments_per_block(params, opts);
    let mut deepest = 0;
    let mut last_error: Option<Error> = None;
    for v in seed_profiles(opts.seeds.max(1)) {
        let Some(anchors) = seed_anchors(&flow, regions, itinerary, m, v, None, opts)? else {
            continue;
        };
        let mut nodes = nodes_from_anchors(&flow, &anchors, opts)?;
        let (residual, steps) = match polish(&flow, &mut nodes, true, opts) {
            Ok(r) => r,
            Err(e) => {
                last_error = Some(e);
                continue;
            }
        };
        let (depth, angles) = matched_depth(&flow, regions, itinerary, &nodes, m, per)?;
        deepest = deepest.max(depth);
        if depth < m || !(residual <= opts.tol) {
            continue;
        }
        let anchors: Vec<PhaseState> = (0..m).map(|k| nodes[k * per].z).collect();
        let single_shot_residual = (0..m)
            .try_fold(anchors[0], |z, _| flow.poincare(z))
            .map(|z| z.distance(&anchors[0]))
            .unwrap_or(f64::NAN);
        return Ok(PeriodicOrbit {
            itinerary: itinerary.clone(),
            params: *params,
            anchors,
            nodes,
            residual,
            single_shot_residual,
            angles,
            newton_steps: steps,
            seed_profile: v,
        });
    }
    match last_error {
        Some(e) if deepest == 0 => Err(e),
        _ => Err(Error::NotFound { depth: deepest }),
    }
}

/// A finite orbit segment realizing a finite symbol block.
#[derive(Debug, Clone, PartialEq)]
pub struct Shadow {
    pub itinerary: Itinerary,
    /// `z, ψ(z), …, ψ^{L−1}(z)` as shooting anchors.
    pub points: Vec<PhaseState>,
    pub nodes: Vec<ShootingNode>,
    pub residual: f64,
    pub depth: usize,
}

/// Orbit segment whose first `L` period-map iterates lie in the prescribed
/// symbol sets, the last image landing back in `A`.
pub fn shadow_finite(
    params: &ModelParams,
    regions: &RegionSet,
    itinerary: &Itinerary,
    opts: &SearchOptions,
) -> Result<Shadow> {
    let flow = Flow::with_tolerances(*params, opts.flow_tol);
    let len = itinerary.len();
    let per = segments_per_block(params, opts);
    let mut deepest = 0;
    for v in seed_profiles(opts.seeds.max(1)) {
        let Some(anchors) = seed_anchors(&flow, regions, itinerary, len, v, Some(0.5), opts)?
        else {
            continue;
        };
        let mut nodes = nodes_from_anchors(&flow, &anchors, opts)?;
        let Ok((residual, _)) = polish(&flow, &mut nodes, false, opts) else {
            continue;
        };
        let (depth, _) = matched_depth(&flow, regions, itinerary, &nodes, len, per)?;
        let last = nodes.last().unwrap();
        let lands = flow
            .advance(last.mu, last.z, last.dt)
            .map(|z| regions.contains(Rect::A, &z))
            .unwrap_or(false);
        let depth = if depth == len && !lands {
            len - 1
        } else {
            depth
        };
        deepest = deepest.max(depth);
        if depth == len && residual <= opts.tol {
            return Ok(Shadow {
                itinerary: itinerary.clone(),
                points: (0..len).map(|k| nodes[k * per].z).collect(),
                nodes,
                residual,
                depth,
            });
        }
    }
    Err(Error::NotFound { depth: deepest })
}

/// Checks of one period block `[(k−1)β, kβ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCheck {
    pub block: usize,
    pub symbol: usize,
    pub maxima: usize,
    pub minima: usize,
    pub counts_ok: bool,
    /// Least value of `g x − n0 F(x)` over the low phase.
    pub convexity_margin: f64,
    /// `x′` at the switch to the low phase and at the block end.
    pub slope_at_switch: f64,
    pub slope_at_end: f64,
    pub convex_ok: bool,
    pub passed: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItineraryReport {
    pub itinerary: Itinerary,
    pub blocks: Vec<BlockCheck>,
    pub confinement: Confinement,
    pub passed: bool,
}

impl ItineraryReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("itinerary = {}\n", self.itinerary));
        s.push_str(&format!("passed = {}\n", self.passed));
        s.push_str("confinement\n");
        s.push_str(&format!("  confined = {}\n", self.confinement.confined));
        s.push_str(&format!("  inf_x = {:.17e}\n", self.confinement.inf_x));
        s.push_str(&format!("  sup_x = {:.17e}\n", self.confinement.sup_x));
        for b in &self.blocks {
            s.push_str(&format!("block {}\n", b.block));
            s.push_str(&format!("  symbol = {}\n", b.symbol));
            s.push_str(&format!("  maxima = {}\n", b.maxima));
            s.push_str(&format!("  minima = {}\n", b.minima));
            s.push_str(&format!("  counts_ok = {}\n", b.counts_ok));
            s.push_str(&format!(
                "  convexity_margin = {:.17e}\n",
                b.convexity_margin
            ));
            s.push_str(&format!("  slope_at_switch = {:.17e}\n", b.slope_at_switch));
            s.push_str(&format!("  slope_at_end = {:.17e}\n", b.slope_at_end));
            s.push_str(&format!("  convex_ok = {}\n", b.convex_ok));
            s.push_str(&format!("  passed = {}\n", b.passed));
            if !b.note.is_empty() {
                s.push_str(&format!("  note = {}\n", b.note));
            }
        }
        s
    }
}

/// Samples per unit time for the low-phase convexity check.
const CONVEXITY_DENSITY: f64 = 1e3;

/// Block-by-block checks of a recorded switched trajectory starting at
/// time zero.
pub fn verify_trajectory(
    params: &ModelParams,
    traj: &Trajectory,
    itinerary: &Itinerary,
    blocks: usize,
) -> ItineraryReport {
    let nl = params.cubic();
    let mut checks = Vec::with_capacity(blocks);
    for k in 0..blocks {
        let symbol = itinerary.symbol(k);
        let start = k as f64 * params.beta;
        let switch = start + params.alpha;
        let end = start + params.beta;
        let mut note = String::new();
        let (maxima, minima) = match count_extrema(traj, start, switch) {
            Ok(c) => c,
            Err(e) => {
                note = e.to_string();
                (usize::MAX, usize::MAX)
            }
        };
        let counts_ok = (maxima, minima) == expected_extrema(symbol);
        let samples = ((end - switch) * CONVEXITY_DENSITY).ceil().max(2.0) as usize;
        let convexity_margin = (0..=samples)
            .map(|i| {
                let t = switch + (end - switch) * i as f64 / samples as f64;
                let x = traj.state_at(t).x;
                params.g * x - params.n0 * nl.value(x)
            })
            .fold(f64::INFINITY, f64::min);
        let slope_at_switch = traj.state_at(switch).y;
        let slope_at_end = traj.state_at(end).y;
        let convex_ok = convexity_margin > 0.0 && slope_at_switch < 0.0 && slope_at_end > 0.0;
        checks.push(BlockCheck {
            block: k + 1,
            symbol,
            maxima,
            minima,
            counts_ok,
            convexity_margin,
            slope_at_switch,
            slope_at_end,
            convex_ok,
            passed: counts_ok && convex_ok,
            note,
        });
    }
    let confinement = confinement_check(traj);
    ItineraryReport {
        itinerary: itinerary.clone(),
        passed: confinement.confined && checks.iter().all(|b| b.passed),
        blocks: checks,
        confinement,
    }
}

/// Integrates the switched flow from `z` over `horizon_blocks` periods and
/// checks every block against `itinerary`.
pub fn verify_itinerary(
    flow: &Flow,
    z: PhaseState,
    itinerary: &Itinerary,
    horizon_blocks: usize,
) -> Result<ItineraryReport> {
    let blocks = horizon_blocks.max(1);
    let traj = flow.switched(z, blocks as f64 * flow.params.beta)?;
    Ok(verify_trajectory(&flow.params, &traj, itinerary, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn itinerary_parsing_and_rotation() {
        let it = Itinerary::parse("(1, 2,2)", 2).unwrap();
        assert_eq!(it.symbols(), &[1, 2, 2]);
        assert_eq!(it.to_string(), "(1,2,2)");
        assert_eq!(it.shifted(1).symbols(), &[2, 2, 1]);
        assert!(it.shifted(2).is_rotation_of(&it));
        assert!(!Itinerary::parse("1 1 2", 2).unwrap().is_rotation_of(&it));
        assert!(Itinerary::parse("3", 2).is_err());
        assert!(Itinerary::parse("", 2).is_err());
        assert!(Itinerary::parse("1,x", 2).is_err());
        assert_eq!(it.symbol(4), 2);
    }

    #[test]
    fn seed_profiles_are_distinct() {
        let v = seed_profiles(7);
        assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn layout_covers_each_period() {
        let p = ModelParams::new(0.1, 0.4, 0.5, 200.0, 2.7, 5.7).unwrap();
        let opts = SearchOptions::default();
        let plan = layout(&p, 2, &opts);
        let total: f64 = plan.iter().map(|s| s.1).sum();
        assert!((total - 2.0 * p.beta).abs() < 1e-12);
        assert!(plan.iter().all(|s| s.1 <= opts.low_segment + 1e-12));
        let per = segments_per_block(&p, &opts);
        assert_eq!(plan[per].0, p.beta);
    }
}
