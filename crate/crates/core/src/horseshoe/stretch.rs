//! Numerical verification of the stretching-along-paths relation between
//! oriented rectangles.
//!
//! A crossing path of the source rectangle is sampled adaptively. When a
//! symbol is selected, the path is first cut down to the parameter window in
//! which the rotation angle lies in that symbol's band. Inside the window we
//! look for a run of parameters whose images stay in the target and go from
//! one target side to the other; run endpoints are refined by bisection.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::Result;
use crate::flow::{Flow, PhaseState};
use crate::horseshoe::regions::{CrossingPath, Rect, RegionSet, Side};
use crate::horseshoe::symbol_band;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapId {
    Psi1,
    Psi0,
    Psi,
}

impl MapId {
    pub fn name(&self) -> &'static str {
        match self {
            MapId::Psi1 => "psi1",
            MapId::Psi0 => "psi0",
            MapId::Psi => "psi",
        }
    }

    fn uses_angle(&self) -> bool {
        !matches!(self, MapId::Psi0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchOptions {
    pub paths: usize,
    /// Bisection tolerance on the path parameter.
    pub refine_tol: f64,
    /// Uniform samples per path before adaptive refinement.
    pub initial_samples: usize,
    /// Maximum number of interval halvings during refinement.
    pub max_depth: usize,
}

impl Default for StretchOptions {
    fn default() -> Self {
        Self {
            paths: 64,
            refine_tol: 1e-10,
            initial_samples: 65,
            max_depth: 14,
        }
    }
}

/// One evaluated path parameter.
#[derive(Debug, Clone, Copy)]
struct Probe {
    t: f64,
    theta: f64,
    /// Across-coordinate of the image in the target.
    u: f64,
    slack: f64,
    /// For the composite map, the same for the intermediate image in `B`.
    mid_u: f64,
    mid_slack: f64,
}

/// Which image a sampling pass resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    /// The intermediate image for the composite map, the image otherwise.
    Outer,
    Final,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub profile: f64,
    /// Parameters where the angle enters and leaves the selected band.
    pub band_window: Option<(f64, f64)>,
    /// Certified subinterval.
    pub interval: Option<(f64, f64)>,
    /// Target sides hit by the images of the interval endpoints.
    pub sides: Option<(Side, Side)>,
    pub side_margin: f64,
    pub transverse_margin: f64,
    pub band_margin: f64,
    pub margin: f64,
    /// Changes of the side, transverse and band quantities when the
    /// decisive samples are recomputed under tighter integration.
    pub side_error: f64,
    pub transverse_error: f64,
    pub band_error: f64,
    pub samples: usize,
    pub passed: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StretchReport {
    pub map: MapId,
    pub symbol: Option<usize>,
    pub source: Rect,
    pub target: Rect,
    pub records: Vec<PathRecord>,
    pub required_margin: f64,
    pub min_margin: f64,
    pub passed: bool,
}

impl StretchReport {
    pub fn label(&self) -> String {
        let src = match self.symbol {
            Some(j) => format!("D{j}"),
            None => self.source.name().to_string(),
        };
        format!(
            "({src}, {}): {} -> {}",
            self.map.name(),
            self.source.name(),
            self.target.name()
        )
    }
}

#[derive(Clone, Copy)]
struct Verifier<'a> {
    regions: &'a RegionSet,
    flow: Flow,
    /// Tighter-tolerance flow for error estimates.
    check: Flow,
    map: MapId,
    symbol: Option<usize>,
    path: CrossingPath<'a>,
    target: Rect,
    opts: StretchOptions,
}

impl Verifier<'_> {
    fn probe(&self, t: f64) -> Result<Probe> {
        let z = self.path.point(t)?;
        let (image, theta, mid) = match self.map {
            MapId::Psi1 => {
                let (w, theta) = self.flow.psi1_with_angle(z)?;
                (w, theta, None)
            }
            MapId::Psi0 => (self.flow.psi0(z)?, f64::NAN, None),
            MapId::Psi => {
                let (w, theta) = self.flow.psi1_with_angle(z)?;
                (self.flow.psi0(w)?, theta, Some(w))
            }
        };
        let (mid_u, mid_slack) = match mid {
            Some(w) => (
                self.regions.across(Rect::B, &w),
                self.regions.transverse_slack(Rect::B, &w),
            ),
            None => (f64::NAN, f64::NAN),
        };
        Ok(Probe {
            t,
            theta,
            u: self.regions.across(self.target, &image),
            slack: self.regions.transverse_slack(self.target, &image),
            mid_u,
            mid_slack,
        })
    }

    /// Across-coordinate and slack resolved at `level`.
    fn coords(&self, p: &Probe, level: Level) -> (f64, f64) {
        if level == Level::Outer && self.map == MapId::Psi {
            (p.mid_u, p.mid_slack)
        } else {
            (p.u, p.slack)
        }
    }

    fn needs_split(&self, a: &Probe, b: &Probe, level: Level) -> bool {
        if self.map.uses_angle() && (a.theta - b.theta).abs() > PI / 4.0 {
            return true;
        }
        let (ua, ub) = (self.coords(a, level).0, self.coords(b, level).0);
        let (lo, hi) = (ua.min(ub), ua.max(ub));
        hi - lo > 0.25 && lo < 1.25 && hi > -0.25
    }

    /// Uniform samples on `[t0, t1]` refined where the angle or the
    /// resolved image changes quickly.
    fn sample(&self, t0: f64, t1: f64, level: Level) -> Result<Vec<Probe>> {
        let n = self.opts.initial_samples.max(2);
        let mut probes: Vec<Probe> = (0..n)
            .map(|i| self.probe(t0 + (t1 - t0) * i as f64 / (n - 1) as f64))
            .collect::<Result<_>>()?;
        let min_width = (t1 - t0) / ((n - 1) as f64 * (1u64 << self.opts.max_depth) as f64);
        loop {
            let mut next = Vec::with_capacity(probes.len() * 2);
            let mut split = false;
            for w in probes.windows(2) {
                next.push(w[0]);
                if w[1].t - w[0].t > 1.5 * min_width && self.needs_split(&w[0], &w[1], level) {
                    next.push(self.probe(0.5 * (w[0].t + w[1].t))?);
                    split = true;
                }
            }
            next.push(*probes.last().unwrap());
            probes = next;
            if !split {
                return Ok(probes);
            }
        }
    }

    /// Bisection on a scalar of the probe between two parameters.
    fn refine<F>(&self, lo: &Probe, hi: &Probe, value: F) -> Result<Probe>
    where
        F: Fn(&Probe) -> f64,
    {
        let (mut lo, mut hi) = (*lo, *hi);
        let sign_lo = value(&lo) > 0.0;
        while hi.t - lo.t > self.opts.refine_tol {
            let mid = self.probe(0.5 * (lo.t + hi.t))?;
            if (value(&mid) > 0.0) == sign_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(if value(&lo).abs() < value(&hi).abs() {
            lo
        } else {
            hi
        })
    }

    fn run(&self, profile: f64) -> PathRecord {
        let mut record = PathRecord {
            profile,
            band_window: None,
            interval: None,
            sides: None,
            side_margin: f64::NAN,
            transverse_margin: f64::NAN,
            band_margin: f64::NAN,
            margin: f64::NEG_INFINITY,
            side_error: f64::NAN,
            transverse_error: f64::NAN,
            band_error: f64::NAN,
            samples: 0,
            passed: false,
            note: String::new(),
        };
        if let Err(e) = self.run_inner(&mut record) {
            record.passed = false;
            record.note = e.to_string();
        }
        record
    }

    fn run_inner(&self, record: &mut PathRecord) -> Result<()> {
        let Some(best) = self.crossing_run(record)? else {
            return Ok(());
        };
        let gap = self.regions.side_gap(self.target);
        record.interval = Some((best.start.t, best.end.t));
        record.sides = Some(if best.start.u < 0.5 {
            (Side::Left, Side::Right)
        } else {
            (Side::Right, Side::Left)
        });
        record.side_margin = best.overshoot * gap;
        record.transverse_margin = best.slack;
        record.band_margin = match self.symbol {
            Some(j) => {
                let (lower, upper) = symbol_band(j);
                best.thetas
                    .iter()
                    .map(|th| (th - lower).min(upper - th))
                    .fold(f64::INFINITY, f64::min)
            }
            None => f64::INFINITY,
        };
        record.margin = record
            .side_margin
            .min(record.transverse_margin)
            .min(record.band_margin);
        let (side, transverse, band) = self.error_estimate(&best, gap)?;
        record.side_error = side;
        record.transverse_error = transverse;
        record.band_error = band;
        Ok(())
    }

    /// The best crossing run inside the band window, or `None` with a note.
    fn crossing_run(&self, record: &mut PathRecord) -> Result<Option<Run>> {
        let mut probes = self.sample(0.0, 1.0, Level::Outer)?;
        record.samples = probes.len();
        if let Some(j) = self.symbol {
            let (lower, upper) = symbol_band(j);
            let Some((ia, ib)) = band_run(&probes, lower, upper) else {
                record.note = format!("angle never sweeps band {j}");
                return Ok(None);
            };
            // entry and exit of the band, refined
            let mut window = probes[ia..=ib].to_vec();
            if ia > 0 {
                let edge = edge_for(&probes[ia - 1], lower, upper);
                let p = self.refine(&probes[ia - 1], &probes[ia], |p| p.theta - edge)?;
                window.insert(0, p);
            }
            if ib + 1 < probes.len() {
                let edge = edge_for(&probes[ib + 1], lower, upper);
                let p = self.refine(&probes[ib], &probes[ib + 1], |p| p.theta - edge)?;
                window.push(p);
            }
            record.band_window = Some((window[0].t, window.last().unwrap().t));
            probes = window;
        }
        if self.map == MapId::Psi {
            // the composite crosses inside the parameters where ψ1 crosses B
            let Some(inner) = self.best_run(&probes, Level::Outer)? else {
                record.note = "psi1 image never crosses B".into();
                return Ok(None);
            };
            probes = self.sample(inner.start.t, inner.end.t, Level::Final)?;
            record.samples += probes.len();
        }
        let best = self.best_run(&probes, Level::Final)?;
        if best.is_none() {
            record.note = "no subinterval whose image crosses the target".into();
        }
        Ok(best)
    }

    /// Changes of the margin-defining quantities when the decisive samples
    /// are recomputed with the check tolerances.
    fn error_estimate(&self, run: &Run, gap: f64) -> Result<(f64, f64, f64)> {
        let fine = Verifier {
            flow: self.check,
            ..*self
        };
        let (mut side, mut transverse, mut band): (f64, f64, f64) = (0.0, 0.0, 0.0);
        // the side margin rests on the bracketing samples, the others on
        // the run itself
        let probes = [
            (&run.start, true),
            (&run.end, true),
            (&run.tightest, true),
            (&run.before, false),
            (&run.after, false),
        ];
        for (p, inside) in probes {
            let q = fine.probe(p.t)?;
            let (u0, s0) = self.coords(p, run.level);
            let (u1, s1) = self.coords(&q, run.level);
            if !inside {
                side = side.max((u1 - u0).abs() * gap);
            } else {
                transverse = transverse.max((s1 - s0).abs());
                if self.map.uses_angle() {
                    band = band.max((q.theta - p.theta).abs());
                }
            }
        }
        Ok((side, transverse, band))
    }

    /// The crossing run with the largest margin.
    fn best_run(&self, probes: &[Probe], level: Level) -> Result<Option<Run>> {
        let mut best: Option<Run> = None;
        let n = probes.len();
        let u = |p: &Probe| self.coords(p, level).0;
        let inside = |p: &Probe| {
            let (u, slack) = self.coords(p, level);
            u > 0.0 && u < 1.0 && slack > 0.0
        };
        let mut i = 0;
        while i < n {
            if !inside(&probes[i]) {
                i += 1;
                continue;
            }
            let mut k = i;
            while k + 1 < n && inside(&probes[k + 1]) {
                k += 1;
            }
            // the run must be bracketed by samples beyond opposite sides
            if i > 0 && k + 1 < n {
                let (before, after) = (
                    outer_bracket(probes[..i].iter().rev(), u),
                    outer_bracket(probes[k + 1..].iter(), u),
                );
                let crosses =
                    (u(before) <= 0.0 && u(after) >= 1.0) || (u(before) >= 1.0 && u(after) <= 0.0);
                if crosses {
                    let start_level = if u(before) <= 0.0 { 0.0 } else { 1.0 };
                    let end_level = 1.0 - start_level;
                    let start = self.refine(&probes[i - 1], &probes[i], |p| u(p) - start_level)?;
                    let end = self.refine(&probes[k], &probes[k + 1], |p| u(p) - end_level)?;
                    let slack_of = |p: &Probe| self.coords(p, level).1;
                    let mut tightest = if slack_of(&start) < slack_of(&end) {
                        start
                    } else {
                        end
                    };
                    let mut thetas = vec![start.theta, end.theta];
                    for p in &probes[i..=k] {
                        if slack_of(p) < slack_of(&tightest) {
                            tightest = *p;
                        }
                        thetas.push(p.theta);
                    }
                    let beyond =
                        |p: &Probe, side: f64| if side == 0.0 { -u(p) } else { u(p) - 1.0 };
                    let overshoot = beyond(before, start_level)
                        .min(beyond(after, end_level))
                        .min(1.0);
                    let candidate = Run {
                        start,
                        end,
                        before: *before,
                        after: *after,
                        slack: slack_of(&tightest),
                        tightest,
                        overshoot,
                        thetas,
                        level,
                    };
                    let better = match &best {
                        None => true,
                        Some(b) => candidate.score() > b.score(),
                    };
                    if better {
                        best = Some(candidate);
                    }
                }
            }
            i = k + 1;
        }
        Ok(best)
    }
}

struct Run {
    start: Probe,
    end: Probe,
    /// Bracketing samples beyond the target sides.
    before: Probe,
    after: Probe,
    /// Sample of least transverse slack.
    tightest: Probe,
    level: Level,
    slack: f64,
    overshoot: f64,
    thetas: Vec<f64>,
}

impl Run {
    fn score(&self) -> f64 {
        self.slack.min(self.overshoot)
    }
}

/// Among the consecutive samples beyond the same target side as the first
/// one, the farthest beyond it (overshoots past a full side gap do not count).
fn outer_bracket<'p, I, U>(mut samples: I, u: U) -> &'p Probe
where
    I: Iterator<Item = &'p Probe>,
    U: Fn(&Probe) -> f64,
{
    let first = samples.next().expect("bracket side has a sample");
    let left = u(first) <= 0.0;
    let beyond = |p: &Probe| (if left { -u(p) } else { u(p) - 1.0 }).min(1.0);
    let mut best = first;
    for p in samples {
        if beyond(p) < 0.0 {
            break;
        }
        if beyond(p) > beyond(best) {
            best = p;
        }
    }
    best
}

fn edge_for(outside: &Probe, lower: f64, upper: f64) -> f64 {
    if outside.theta < lower {
        lower
    } else {
        upper
    }
}

/// Indices `[ia, ib]` of the longest run of in-band samples whose neighbours
/// lie beyond opposite band edges.
fn band_run(probes: &[Probe], lower: f64, upper: f64) -> Option<(usize, usize)> {
    let n = probes.len();
    let in_band = |p: &Probe| p.theta >= lower && p.theta <= upper;
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < n {
        if !in_band(&probes[i]) {
            i += 1;
            continue;
        }
        let mut k = i;
        while k + 1 < n && in_band(&probes[k + 1]) {
            k += 1;
        }
        let below = |p: &Probe| p.theta < lower;
        let opposite = i > 0 && k + 1 < n && below(&probes[i - 1]) != below(&probes[k + 1]);
        if opposite
            && best.is_none_or(|(a, b)| probes[k].t - probes[i].t > probes[b].t - probes[a].t)
        {
            best = Some((i, k));
        }
        i = k + 1;
    }
    best
}

/// The flow used to estimate integration error: tolerances a hundred
/// times tighter.
pub fn check_flow(flow: &Flow) -> Flow {
    let mut tol = flow.tol;
    tol.rtol *= 1e-2;
    tol.atol *= 1e-2;
    Flow::with_tolerances(flow.params, tol)
}

/// Checks that `map`, restricted to the symbol set `symbol` (or to the
/// whole source when `None`), stretches `source` to `target` along
/// `opts.paths` crossing paths at equispaced transverse profiles.
pub fn verify_stretch(
    regions: &RegionSet,
    flow: &Flow,
    map: MapId,
    symbol: Option<usize>,
    source: Rect,
    target: Rect,
    opts: &StretchOptions,
) -> StretchReport {
    let required_margin = 10.0 * flow.tol.rtol;
    let check = check_flow(flow);
    let n = opts.paths.max(1);
    let profiles: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                0.5
            } else {
                i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let mut records: Vec<PathRecord> = profiles
        .par_iter()
        .map(|&profile| {
            let v = Verifier {
                regions,
                flow: *flow,
                check,
                map,
                symbol,
                path: CrossingPath {
                    regions,
                    rect: source,
                    profile,
                },
                target,
                opts: *opts,
            };
            v.run(profile)
        })
        .collect();
    for r in &mut records {
        let checks = [
            ("side", r.side_margin, r.side_error),
            ("transverse", r.transverse_margin, r.transverse_error),
            ("band", r.band_margin, r.band_error),
        ];
        let weak = checks
            .iter()
            .find(|(_, m, e)| !(*m > required_margin.max(*e)));
        r.passed = r.interval.is_some() && weak.is_none();
        if let (Some(_), Some((name, m, e))) = (r.interval, weak) {
            if r.note.is_empty() {
                r.note = format!("{name} margin {m:e} below max(10 rtol, error estimate {e:e})");
            }
        }
    }
    let min_margin = records
        .iter()
        .map(|r| r.margin)
        .fold(f64::INFINITY, f64::min);
    StretchReport {
        map,
        symbol,
        source,
        target,
        passed: records.iter().all(|r| r.passed),
        records,
        required_margin,
        min_margin,
    }
}

/// For each symbol `j = 1..=p`, the parameters `(t_{j,1}, t_{j,2})` where
/// `θ(α, γ(t))` first reaches `−(4j+1)π/2` and then `−2jπ` along the path.
pub fn band_crossings(
    regions: &RegionSet,
    flow: &Flow,
    profile: f64,
    p_symbols: usize,
    opts: &StretchOptions,
) -> Result<Vec<Option<(f64, f64)>>> {
    let v = Verifier {
        regions,
        flow: *flow,
        check: check_flow(flow),
        map: MapId::Psi1,
        symbol: None,
        path: CrossingPath {
            regions,
            rect: Rect::A,
            profile,
        },
        target: Rect::B,
        opts: *opts,
    };
    let probes = v.sample(0.0, 1.0, Level::Outer)?;
    (1..=p_symbols)
        .map(|j| {
            let (lower, upper) = symbol_band(j);
            let Some((ia, ib)) = band_run(&probes, lower, upper) else {
                return Ok(None);
            };
            if ia == 0 || ib + 1 >= probes.len() {
                return Ok(None);
            }
            let e1 = edge_for(&probes[ia - 1], lower, upper);
            let e2 = edge_for(&probes[ib + 1], lower, upper);
            let t1 = v.refine(&probes[ia - 1], &probes[ia], |p| p.theta - e1)?.t;
            let t2 = v.refine(&probes[ib], &probes[ib + 1], |p| p.theta - e2)?.t;
            Ok(Some((t1, t2)))
        })
        .collect()
}

/// The part of one crossing path of `A` in the symbol-`j` window whose
/// composite images cross `A`.
#[derive(Clone, Copy)]
pub struct Strip<'a> {
    verifier: Verifier<'a>,
    start: Probe,
    end: Probe,
}

/// Strip of symbol `symbol` on the path of `A` at `profile`, if the
/// composite map crosses there.
pub fn composite_strip<'a>(
    regions: &'a RegionSet,
    flow: &Flow,
    symbol: usize,
    profile: f64,
    opts: &StretchOptions,
) -> Result<Option<Strip<'a>>> {
    let verifier = Verifier {
        regions,
        flow: *flow,
        check: check_flow(flow),
        map: MapId::Psi,
        symbol: Some(symbol),
        path: CrossingPath {
            regions,
            rect: Rect::A,
            profile,
        },
        target: Rect::A,
        opts: *opts,
    };
    let mut scratch = PathRecord {
        profile,
        band_window: None,
        interval: None,
        sides: None,
        side_margin: f64::NAN,
        transverse_margin: f64::NAN,
        band_margin: f64::NAN,
        margin: f64::NAN,
        side_error: f64::NAN,
        transverse_error: f64::NAN,
        band_error: f64::NAN,
        samples: 0,
        passed: false,
        note: String::new(),
    };
    Ok(verifier.crossing_run(&mut scratch)?.map(|run| Strip {
        verifier,
        start: run.start,
        end: run.end,
    }))
}

impl Strip<'_> {
    pub fn interval(&self) -> (f64, f64) {
        (self.start.t, self.end.t)
    }

    pub fn point(&self, t: f64) -> Result<PhaseState> {
        self.verifier.path.point(t)
    }

    /// Path parameter whose composite image has across-coordinate `target`
    /// in `A`, by bisection over the strip.
    pub fn locate(&self, target: f64) -> Result<f64> {
        let p = self
            .verifier
            .refine(&self.start, &self.end, |p| p.u - target)?;
        Ok(p.t)
    }
}
