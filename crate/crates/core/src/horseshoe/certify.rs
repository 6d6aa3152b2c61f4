//! End-to-end horseshoe certificate: threshold regime, timing inequalities,
//! separation and inclusion of the rectangles, band reachability on the
//! sides of `A`, the stretching relations and the crossing order.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::error::Result;
use crate::flow::Flow;
use crate::horseshoe::regions::{build_regions, Rect, RegionOptions, RegionSet, Side};
use crate::horseshoe::stretch::{
    band_crossings, verify_stretch, MapId, StretchOptions, StretchReport,
};
use crate::horseshoe::symbol_band;
use crate::model::{default_mu_bar, ModelParams};
use crate::ode::Tolerances;
use crate::timemaps;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    /// Number of symbols `p ≥ 2`.
    pub p_symbols: usize,
    pub stretch: StretchOptions,
    pub tol: Tolerances,
    /// `μ̄` for the threshold constants; `None` for twice `m1*`.
    pub mu_bar: Option<f64>,
    /// Resolution of the separation and inclusion grids.
    pub inclusion_grid: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            p_symbols: 2,
            stretch: StretchOptions::default(),
            tol: Tolerances::default(),
            mu_bar: None,
            inclusion_grid: 1000,
        }
    }
}

/// One named check with its recorded quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub name: &'static str,
    pub passed: bool,
    pub entries: Vec<(String, String)>,
}

impl Stage {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: true,
            entries: Vec::new(),
        }
    }

    fn num(&mut self, key: &str, value: f64) {
        self.entries
            .push((key.to_string(), format!("{value:.17e}")));
    }

    fn flag(&mut self, key: &str, value: bool) {
        self.entries.push((key.to_string(), value.to_string()));
        self.passed &= value;
    }

    fn text(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub params: ModelParams,
    pub pbar0: f64,
    pub p0: f64,
    pub p_symbols: usize,
    pub paths: usize,
    pub tol: Tolerances,
    pub stages: Vec<Stage>,
    pub reports: Vec<StretchReport>,
    pub passed: bool,
    pub first_failure: Option<&'static str>,
}

impl Certificate {
    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Smallest stretch margin over all reports.
    pub fn min_margin(&self) -> f64 {
        self.reports
            .iter()
            .map(|r| r.min_margin)
            .fold(f64::INFINITY, f64::min)
    }

    /// Indented key-value text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let _ = writeln!(s, "certificate");
        let _ = writeln!(s, "  passed = {}", self.passed);
        let _ = writeln!(
            s,
            "  first_failure = {}",
            self.first_failure.unwrap_or("none")
        );
        let _ = writeln!(s, "  params");
        for (k, v) in [
            ("g", p.g),
            ("a", p.a),
            ("n0", p.n0),
            ("n1", p.n1),
            ("alpha", p.alpha),
            ("beta", p.beta),
            ("pbar0", self.pbar0),
            ("p0", self.p0),
            ("rtol", self.tol.rtol),
            ("atol", self.tol.atol),
        ] {
            let _ = writeln!(s, "    {k} = {v:.17e}");
        }
        let _ = writeln!(s, "    p_symbols = {}", self.p_symbols);
        let _ = writeln!(s, "    paths = {}", self.paths);
        for stage in &self.stages {
            let _ = writeln!(s, "  stage {}", stage.name);
            let _ = writeln!(s, "    passed = {}", stage.passed);
            for (k, v) in &stage.entries {
                let _ = writeln!(s, "    {k} = {v}");
            }
        }
        for r in &self.reports {
            let _ = writeln!(s, "  stretch {}", r.label());
            let _ = writeln!(s, "    passed = {}", r.passed);
            let _ = writeln!(s, "    paths = {}", r.records.len());
            let _ = writeln!(
                s,
                "    failed_paths = {}",
                r.records.iter().filter(|x| !x.passed).count()
            );
            let _ = writeln!(s, "    min_margin = {:.17e}", r.min_margin);
            let _ = writeln!(s, "    required_margin = {:.17e}", r.required_margin);
        }
        s
    }

    /// Per-path records of every stretch report.
    pub fn write_paths_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "map,symbol,source,target,profile,band_t1,band_t2,t1,t2,start_side,end_side,side_margin,transverse_margin,band_margin,margin,samples,passed,note"
        )?;
        let side = |s: Side| match s {
            Side::Left => "left",
            Side::Right => "right",
        };
        for r in &self.reports {
            for rec in &r.records {
                let (b1, b2) = rec.band_window.unwrap_or((f64::NAN, f64::NAN));
                let (t1, t2) = rec.interval.unwrap_or((f64::NAN, f64::NAN));
                let (s1, s2) = rec
                    .sides
                    .map(|(a, b)| (side(a), side(b)))
                    .unwrap_or(("", ""));
                writeln!(
                    w,
                    "{},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{},\"{}\"",
                    r.map.name(),
                    r.symbol.map(|j| j.to_string()).unwrap_or_default(),
                    r.source.name(),
                    r.target.name(),
                    rec.profile,
                    b1,
                    b2,
                    t1,
                    t2,
                    s1,
                    s2,
                    rec.side_margin,
                    rec.transverse_margin,
                    rec.band_margin,
                    rec.margin,
                    rec.samples,
                    rec.passed,
                    rec.note.replace('"', "'"),
                )?;
            }
        }
        Ok(())
    }
}

/// Runs every check in order and stops at the first failing stage.
/// `p0 = None` selects the midpoint of `(p̄0, p*)`.
pub fn certify_horseshoe(
    params: &ModelParams,
    pbar0: f64,
    p0: Option<f64>,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    params.validate()?;
    let osc = params.oscillator();
    let h0 = osc.require_h0()?;
    let mu_bar = match opts.mu_bar {
        Some(m) => m,
        None => default_mu_bar(params)?,
    };
    let mut cert = Certificate {
        params: *params,
        pbar0,
        p0: p0.unwrap_or(f64::NAN),
        p_symbols: opts.p_symbols,
        paths: opts.stretch.paths,
        tol: opts.tol,
        stages: Vec::new(),
        reports: Vec::new(),
        passed: false,
        first_failure: None,
    };
    let flow = Flow::with_tolerances(*params, opts.tol);
    let region_opts = RegionOptions {
        enforce_regime: false,
        mu_bar: Some(mu_bar),
        inclusion_grid: opts.inclusion_grid,
    };

    // regime
    let mut stage = Stage::new("regime");
    stage.num("integral_F", h0);
    let t = match crate::model::horseshoe_constants(params, mu_bar) {
        Ok(t) => t,
        Err(e) => {
            let m0star = osc.m0star();
            stage.num("m0star", m0star);
            stage.num("n0_margin", m0star - params.n0);
            stage.text("error", e.to_string());
            stage.flag("n0_below_m0star", params.n0 < m0star);
            stage.flag("constants_defined", false);
            push(&mut cert, stage);
            return Ok(cert);
        }
    };
    stage.num("m0star", t.m0star);
    stage.num("m1star", t.m1star);
    stage.num("mu_bar", mu_bar);
    stage.num("kappa", t.kappa);
    stage.num("eta", t.eta);
    stage.num("mu_star", t.mu_star);
    stage.num("mu_tilde", t.mu_tilde);
    stage.num("m2star", t.m2star);
    stage.num("n0_margin", t.m0star - params.n0);
    stage.num("n1_margin", params.n1 - t.m2star);
    stage.flag("p_symbols_at_least_2", opts.p_symbols >= 2);
    stage.flag("n0_below_m0star", params.n0 < t.m0star);
    stage.flag("m0star_below_m2star", t.m0star < t.m2star);
    stage.flag("n1_above_m2star", params.n1 > t.m2star);
    if !push(&mut cert, stage) {
        return Ok(cert);
    }

    // timing inequalities and anchor order
    let mut stage = Stage::new("timing");
    let transit = timemaps::p_check0(params)?;
    let p_star = transit.p_check0.min(t.p_hat0);
    let p0 = p0.unwrap_or(0.5 * (pbar0 + p_star));
    cert.p0 = p0;
    let half = 0.5 * params.low_phase();
    stage.num("p_check0", transit.p_check0);
    stage.text("p_check0_monotone", transit.monotone.to_string());
    stage.num("p_hat0", t.p_hat0);
    stage.num("p_star", p_star);
    stage.num("half_low_phase", half);
    stage.flag("anchor_order", pbar0 > 0.0 && pbar0 < p0);
    if stage.passed {
        let sigma0 = timemaps::sigma(&osc, params.n0, p0, params.a)?;
        stage.num("sigma0_p0_a", sigma0);
        stage.num("transit_margin", sigma0 - half);
        stage.flag("transit_outlasts_half_low_phase", sigma0 > half);
        stage.num("p_hat0_margin", t.p_hat0 - p0);
        stage.flag("p0_below_p_hat0", p0 < t.p_hat0);
        let gap = timemaps::check_gap_crossing(params, p0)?;
        stage.num("p1", gap.p1);
        stage.num("b_n1", gap.b_n1);
        stage.num("sigma0_p1_b_n1", gap.transit);
        stage.num("gap_crossing_margin", gap.direct_margin);
        stage.flag("gap_crossing", gap.direct);
        stage.num("gap_sufficient_margin", gap.sufficient_margin);
    }
    if !push(&mut cert, stage) {
        return Ok(cert);
    }

    let regions = build_regions(params, pbar0, p0, &region_opts)?;

    // separation claim
    let mut stage = Stage::new("separation");
    let sep = regions.separation(opts.inclusion_grid.max(2));
    stage.num("c", regions.c);
    stage.num("a_n1", regions.a_n1);
    stage.num("pbar0_plus", sep.pbar0_plus);
    stage.num("e0_hi", regions.e0_hi);
    stage.num("e0_lo", regions.e0_lo);
    stage.num("min_zeta", sep.min_zeta);
    stage.num("argmin_zeta", sep.argmin);
    stage.num("floor", sep.floor);
    stage.text(
        "center_left_of_conjugate",
        sep.center_left_of_conjugate.to_string(),
    );
    stage.flag(
        "c_above_center_energy",
        regions.c > regions.center_energy && regions.c < 0.0,
    );
    stage.flag("band_nonempty", regions.e0_lo < regions.e0_hi);
    stage.flag("zeta_positive", sep.holds);
    if !push(&mut cert, stage) {
        return Ok(cert);
    }

    // inclusion of A in N_c
    let mut stage = Stage::new("inclusion");
    let grid = (opts.inclusion_grid as f64).sqrt().ceil() as usize * 4;
    stage.text("grid", format!("{grid}x{grid}"));
    match regions.left_branch_point(grid) {
        Some(z) => {
            stage.text("violation", format!("({:.17e}, {:.17e})", z.x, z.y));
            stage.flag("upper_component_in_n_c", false);
        }
        None => stage.flag("upper_component_in_n_c", true),
    }
    if !push(&mut cert, stage) {
        return Ok(cert);
    }

    // band reachability on the sides of A
    let mut stage = Stage::new("bands");
    let (deep, _) = symbol_band(opts.p_symbols);
    let n_side = opts.stretch.paths.max(2);
    let mut left_max = f64::NEG_INFINITY;
    for z in regions.side_arc(Rect::A, Side::Left, n_side)? {
        left_max = left_max.max(flow.theta_alpha(z)?);
    }
    // the right side lies on the homoclinic loop, where integrating across
    // the saddle passage amplifies step errors; follow the loop by its time map
    let mut right_min = f64::INFINITY;
    for z in regions.side_arc(Rect::A, Side::Right, n_side)? {
        let (x, y) = timemaps::homoclinic_flight(&osc, params.n1, z.x, z.y, params.alpha)?;
        right_min = right_min.min(y.atan2(x - regions.a_n1));
    }
    stage.num("deep_band_edge", deep);
    stage.num("theta_max_left_side", left_max);
    stage.num("theta_min_right_side", right_min);
    stage.num("left_margin", deep - left_max);
    stage.num("right_margin", right_min + std::f64::consts::PI);
    stage.flag("left_side_below_deepest_band", left_max < deep);
    stage.flag(
        "right_side_above_minus_pi",
        right_min > -std::f64::consts::PI,
    );
    if !push(&mut cert, stage) {
        return Ok(cert);
    }

    // stretching relations
    let mut stage = Stage::new("stretch");
    let mut reports = Vec::new();
    for j in 1..=opts.p_symbols {
        reports.push(verify_stretch(
            &regions,
            &flow,
            MapId::Psi1,
            Some(j),
            Rect::A,
            Rect::B,
            &opts.stretch,
        ));
    }
    reports.push(verify_stretch(
        &regions,
        &flow,
        MapId::Psi0,
        None,
        Rect::B,
        Rect::A,
        &opts.stretch,
    ));
    for j in 1..=opts.p_symbols {
        reports.push(verify_stretch(
            &regions,
            &flow,
            MapId::Psi,
            Some(j),
            Rect::A,
            Rect::A,
            &opts.stretch,
        ));
    }
    for r in &reports {
        let key = format!(
            "{}_{}",
            r.map.name(),
            r.symbol
                .map(|j| format!("D{j}"))
                .unwrap_or_else(|| r.source.name().into())
        );
        stage.num(&format!("{key}_min_margin"), r.min_margin);
        stage.flag(&format!("{key}_passed"), r.passed);
    }
    cert.reports = reports;
    if !push(&mut cert, stage) {
        return Ok(cert);
    }

    // crossing order along every path
    let mut stage = Stage::new("crossing_order");
    let (worst, failed) = crossing_order(&regions, &flow, opts)?;
    stage.num("min_gap", worst);
    stage.text("failed_profiles", failed.len().to_string());
    stage.flag("ordered_on_every_path", failed.is_empty());
    push(&mut cert, stage);
    if cert.first_failure.is_none() {
        cert.passed = true;
    }
    Ok(cert)
}

fn push(cert: &mut Certificate, stage: Stage) -> bool {
    let ok = stage.passed;
    if !ok && cert.first_failure.is_none() {
        cert.first_failure = Some(stage.name);
    }
    cert.stages.push(stage);
    ok
}

/// On each path, the band windows of symbols `p, …, 1` must follow each
/// other in increasing order of the path parameter. Returns the smallest
/// gap between consecutive window parameters and the failing profiles.
fn crossing_order(
    regions: &RegionSet,
    flow: &Flow,
    opts: &CertifyOptions,
) -> Result<(f64, Vec<f64>)> {
    use rayon::prelude::*;
    let n = opts.stretch.paths.max(1);
    let results: Vec<Result<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let profile = if n == 1 {
                0.5
            } else {
                i as f64 / (n - 1) as f64
            };
            let windows = band_crossings(regions, flow, profile, opts.p_symbols, &opts.stretch)?;
            let mut params = Vec::with_capacity(2 * windows.len());
            for w in windows.iter().rev() {
                match w {
                    Some((t1, t2)) => {
                        params.push(*t1);
                        params.push(*t2);
                    }
                    None => return Ok((f64::NEG_INFINITY, profile)),
                }
            }
            let gap = params
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            Ok((gap, profile))
        })
        .collect();
    let mut worst = f64::INFINITY;
    let mut failed = Vec::new();
    for r in results {
        let (gap, profile) = r?;
        worst = worst.min(gap);
        if !(gap > 0.0) {
            failed.push(profile);
        }
    }
    Ok((worst, failed))
}
