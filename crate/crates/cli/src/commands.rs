use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use nagumo_core::flow::{confinement_check, count_extrema, Flow, PhaseState};
use nagumo_core::horseshoe::{
    build_regions, certify_horseshoe, default_p0, CertifyOptions, RegionOptions, StretchOptions,
};
use nagumo_core::model::default_mu_bar;
use nagumo_core::symbolic::{find_periodic, Itinerary, SearchOptions};
use nagumo_core::{horseshoe_constants, timemaps, Error as CoreError, ModelParams, Oscillator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Axis, RunConfig};
use crate::output::{num, row, strip_header, Output};
use crate::{figures, Failed, UsageError};

fn kv(s: &mut String, key: &str, v: f64) {
    let _ = writeln!(s, "{key} = {}", num(v));
}

fn kv_result(s: &mut String, key: &str, v: nagumo_core::Result<f64>) {
    match v {
        Ok(v) => kv(s, key, v),
        Err(e) => {
            let _ = writeln!(s, "{key} = unavailable ({e})");
        }
    }
}

pub fn thresholds(cfg: &RunConfig) -> Result<()> {
    let g = cfg.require(cfg.g, "g")?;
    let a = cfg.require(cfg.a, "a")?;
    let osc = Oscillator::new(g, nagumo_core::Cubic::new(a));
    let mut s = String::from("thresholds\n");
    kv(&mut s, "m0star", osc.m0star());
    kv_result(&mut s, "m1star", osc.m1star());
    kv_result(&mut s, "m1star_optimal", osc.m1star_optimal(1e-10));
    let (lambda, theta) = osc.lambda_theta();
    kv(&mut s, "lambda_sup", lambda);
    kv(&mut s, "theta_sup", theta);
    kv_result(&mut s, "b", osc.root_b());

    let h0 = osc.require_h0();
    let full = [cfg.n0, cfg.n1, cfg.alpha, cfg.beta]
        .iter()
        .all(Option::is_some);
    if let Err(e) = &h0 {
        let _ = writeln!(s, "verdict = H0 violated ({e})");
    } else if !full {
        let _ = writeln!(
            s,
            "verdict = incomplete (kappa and later constants need n0, n1, alpha, beta)"
        );
    } else {
        let params = cfg.params()?;
        let mu_bar = match cfg.mu_bar {
            Some(m) => m,
            None => default_mu_bar(&params)?,
        };
        kv(&mut s, "mu_bar", mu_bar);
        match horseshoe_constants(&params, mu_bar) {
            Ok(t) => {
                kv(&mut s, "kappa", t.kappa);
                kv(&mut s, "eta", t.eta);
                kv(&mut s, "mu_star", t.mu_star);
                kv(&mut s, "mu_tilde", t.mu_tilde);
                kv(&mut s, "m2star", t.m2star);
                kv(&mut s, "p_hat0", t.p_hat0);
                kv_result(
                    &mut s,
                    "p_check0",
                    timemaps::p_check0(&params).map(|b| b.p_check0),
                );
                let checks = [
                    ("n0_below_m0star", params.n0 < t.m0star),
                    ("m0star_below_m2star", t.m0star < t.m2star),
                    ("n1_above_m2star", params.n1 > t.m2star),
                ];
                for (k, v) in checks {
                    let _ = writeln!(s, "{k} = {v}");
                }
                let all = checks.iter().all(|c| c.1);
                let _ = writeln!(
                    s,
                    "verdict = {}",
                    if all {
                        "main regime"
                    } else {
                        "outside main regime"
                    }
                );
            }
            Err(e) => {
                let _ = writeln!(s, "verdict = constants unavailable ({e})");
            }
        }
    }
    print!("{s}");
    Output::new(cfg, "thresholds")?.write("thresholds.txt", &s)?;
    Ok(())
}

pub fn figure(k: usize, cfg: &RunConfig) -> Result<()> {
    let cfg = cfg.clone().with_defaults(&figures::defaults(k)?);
    let out = Output::new(&cfg, &format!("figure {k}"))?;
    for name in figures::emit(k, &cfg, &out)? {
        println!("{}", out.dir().join(name).display());
    }
    Ok(())
}

pub fn levelsets(cfg: &RunConfig) -> Result<()> {
    let g = cfg.require(cfg.g, "g")?;
    let a = cfg.require(cfg.a, "a")?;
    let mus: Vec<f64> = [cfg.n0, cfg.n1].into_iter().flatten().collect();
    if mus.is_empty() {
        bail!(crate::config::ConfigError::Missing("n0"));
    }
    let osc = Oscillator::new(g, nagumo_core::Cubic::new(a));
    let out = Output::new(cfg, "levelsets")?;
    let path = out.write(
        "levelsets.csv",
        &figures::level_sets(&osc, &mus, cfg.levels),
    )?;
    println!("{}", path.display());
    Ok(())
}

/// Transit and return times by integrating until the velocity changes sign.
fn ode_times(flow: &Flow, mu: f64, x0: f64, xi: Option<f64>) -> Result<f64> {
    let z0 = PhaseState::new(x0, 0.0);
    let horizon = 1e3;
    Ok(match xi {
        Some(xi) => {
            flow.first_section_crossing(mu, z0, horizon, |z| z.x - xi)?
                .context("no crossing of the target line")?
                .0
        }
        None => {
            let (t1, z1) = flow
                .first_section_crossing(mu, z0, horizon, |z| z.y)?
                .context("no half turn")?;
            // restart exactly on the axis so the start is not taken as a crossing
            let z1 = PhaseState::new(z1.x, 0.0);
            let (t2, _) = flow
                .first_section_crossing(mu, z1, horizon, |z| z.y)?
                .context("no full turn")?;
            t1 + t2
        }
    })
}

pub fn timemap(cfg: &RunConfig) -> Result<()> {
    let params = cfg.params()?;
    let osc = params.oscillator();
    let (n0, n1, a) = (params.n0, params.n1, params.a);
    let out = Output::new(cfg, "timemap")?;
    let grid = 40;

    let mut body = row(["p0", "sigma", "lower", "upper"]);
    for i in 1..grid {
        let p0 = a * i as f64 / grid as f64;
        let s = timemaps::sigma(&osc, n0, p0, a)?;
        let (lo, hi) = timemaps::sigma_bounds(&osc, n0, p0, a)?;
        body += &row([num(p0), num(s), num(lo), num(hi)]);
    }
    out.write("sigma.csv", &body)?;

    let (center, _) = osc.equilibria(n1)?;
    let mut body = row(["x0", "tau", "x1", "tau_sqrt_mu", "tau_limit"]);
    for i in 1..grid {
        let x0 = center * i as f64 / grid as f64;
        match timemaps::tau(&osc, n1, x0) {
            Ok((tau, x1)) => {
                let limit = timemaps::tau_limit(&osc, x0).unwrap_or(f64::NAN);
                body += &row([num(x0), num(tau), num(x1), num(tau * n1.sqrt()), num(limit)]);
            }
            // levels outside the homoclinic loop are open
            Err(CoreError::NotClosedOrbit { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    out.write("tau.csv", &body)?;

    // seeded comparison against integrated transit and return times
    let flow = Flow::with_tolerances(params, cfg.tolerances());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let b = osc.b_mu(n1)?;
    let floor = osc.energy(n1, center, 0.0);
    let mut body = row([
        "kind",
        "mu",
        "x0",
        "xi",
        "quadrature",
        "integrated",
        "rel_error",
    ]);
    for _ in 0..cfg.samples {
        let p0 = rng.gen_range(0.05 * a..0.95 * a);
        let xi = rng.gen_range(p0..a);
        let q = timemaps::sigma(&osc, n0, p0, xi)?;
        let t = ode_times(&flow, n0, p0, Some(xi))?;
        body += &row([
            "sigma".into(),
            num(n0),
            num(p0),
            num(xi),
            num(q),
            num(t),
            num((q - t).abs() / t),
        ]);
    }
    let mut taken = 0;
    while taken < cfg.samples {
        let x0 = rng.gen_range(0.0..center);
        let level = osc.energy(n1, x0, 0.0);
        if !(level > floor && level < 0.0) || x0 > b {
            continue;
        }
        taken += 1;
        let (q, _) = timemaps::tau(&osc, n1, x0)?;
        let t = ode_times(&flow, n1, x0, None)?;
        body += &row([
            "tau".into(),
            num(n1),
            num(x0),
            String::new(),
            num(q),
            num(t),
            num((q - t).abs() / t),
        ]);
    }
    out.write("timemap_oracle.csv", &body)?;
    println!("{}", out.dir().display());
    Ok(())
}

pub fn orbit(cfg: &RunConfig) -> Result<()> {
    let params = cfg.params()?;
    let z0 = PhaseState::new(cfg.require(cfg.x0, "x0")?, cfg.require(cfg.y0, "y0")?);
    let flow = Flow::with_tolerances(params, cfg.tolerances());
    let blocks = cfg.blocks.max(1);
    let traj = flow.switched(z0, blocks as f64 * params.beta)?;
    let out = Output::new(cfg, "orbit")?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    out.write("orbit.csv", std::str::from_utf8(&csv)?)?;

    let mut s = String::from("orbit\n");
    for k in 0..blocks {
        let start = k as f64 * params.beta;
        let (maxima, minima) = count_extrema(&traj, start, start + params.alpha)?;
        let _ = writeln!(s, "  block {}", k + 1);
        let _ = writeln!(s, "    maxima = {maxima}");
        let _ = writeln!(s, "    minima = {minima}");
        let symbol = (maxima >= 2 && minima + 1 == maxima).then(|| maxima - 1);
        let _ = writeln!(
            s,
            "    symbol = {}",
            symbol.map_or("none".to_string(), |j| j.to_string())
        );
    }
    let c = confinement_check(&traj);
    let _ = writeln!(s, "  confinement");
    let _ = writeln!(s, "    confined = {}", c.confined);
    let _ = writeln!(s, "    inf_x = {}", num(c.inf_x));
    let _ = writeln!(s, "    sup_x = {}", num(c.sup_x));
    if let Some(t) = c.first_exit {
        let _ = writeln!(s, "    first_exit = {}", num(t));
    }
    let _ = writeln!(s, "  energy_drift_rate = {}", num(traj.energy_drift_rate()));
    print!("{s}");
    out.write("orbit.txt", &s)?;
    Ok(())
}

/// Fills `p0` and `mu_bar` so that outputs echo the values actually used.
/// Both stay unset when the threshold constants are undefined, leaving the
/// diagnosis to the certificate.
fn resolve_anchor(cfg: &mut RunConfig, params: &ModelParams) -> Result<f64> {
    let pbar0 = cfg.require(cfg.pbar0, "pbar0")?;
    if cfg.mu_bar.is_none() {
        cfg.mu_bar = default_mu_bar(params).ok();
    }
    if cfg.p0.is_none() {
        cfg.p0 = default_p0(params, pbar0, cfg.mu_bar).ok();
    }
    Ok(pbar0)
}

fn certify_options(cfg: &RunConfig) -> CertifyOptions {
    CertifyOptions {
        p_symbols: cfg.p_symbols,
        stretch: StretchOptions {
            paths: cfg.paths,
            ..StretchOptions::default()
        },
        tol: cfg.tolerances(),
        mu_bar: cfg.mu_bar,
        ..CertifyOptions::default()
    }
}

pub fn certify(cfg: &RunConfig) -> Result<()> {
    let mut cfg = cfg.clone();
    let params = cfg.params()?;
    let pbar0 = resolve_anchor(&mut cfg, &params)?;
    let cert = certify_horseshoe(&params, pbar0, cfg.p0, &certify_options(&cfg))?;
    let out = Output::new(&cfg, "certify")?;
    out.write("certificate.txt", &cert.to_text())?;
    let mut csv = Vec::new();
    cert.write_paths_csv(&mut csv)?;
    out.write("paths.csv", std::str::from_utf8(&csv)?)?;
    println!("passed = {}", cert.passed);
    println!("min_margin = {}", num(cert.min_margin()));
    if !cert.passed {
        bail!(Failed(format!(
            "certification failed at stage {}",
            cert.first_failure.unwrap_or("unknown")
        )));
    }
    Ok(())
}

/// Whether `text` is a passing certificate for `params`, `pbar0`, `p0` and
/// `p_symbols`.
fn certificate_matches(text: &str, params: &ModelParams, cfg: &RunConfig) -> bool {
    let mut passed = false;
    let mut seen = std::collections::HashMap::new();
    for line in strip_header(text) {
        let Some((k, v)) = line.trim().split_once(" = ") else {
            continue;
        };
        if line.starts_with("  passed") && !line.starts_with("    ") {
            passed = v == "true";
        }
        if line.starts_with("    ") {
            seen.entry(k.to_string()).or_insert_with(|| v.to_string());
        }
    }
    let same = |k: &str, want: f64| {
        seen.get(k)
            .and_then(|v| v.parse::<f64>().ok())
            .is_some_and(|v| v == want)
    };
    passed
        && same("g", params.g)
        && same("a", params.a)
        && same("n0", params.n0)
        && same("n1", params.n1)
        && same("alpha", params.alpha)
        && same("beta", params.beta)
        && cfg.pbar0.is_some_and(|p| same("pbar0", p))
        && cfg.p0.is_some_and(|p| same("p0", p))
        && seen.get("p_symbols") == Some(&cfg.p_symbols.to_string())
}

fn itinerary_tag(it: &Itinerary) -> String {
    it.symbols()
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

pub fn find_periodic_cmd(cfg: &RunConfig, itinerary: &str, force: bool) -> Result<()> {
    let itinerary = Itinerary::parse(itinerary, cfg.p_symbols)
        .map_err(|e| UsageError(format!("itinerary: {e}")))?;
    let mut cfg = cfg.clone();
    let params = cfg.params()?;
    let pbar0 = resolve_anchor(&mut cfg, &params)?;
    if !force {
        let path = cfg.out.join("certificate.txt");
        let text = std::fs::read_to_string(&path).map_err(|_| {
            Failed(format!(
                "no certificate at {}; run `certify` first or pass --force",
                path.display()
            ))
        })?;
        if !certificate_matches(&text, &params, &cfg) {
            bail!(Failed(format!(
                "{} is not a passing certificate for these parameters; pass --force to skip",
                path.display()
            )));
        }
    }
    let p0 = match cfg.p0 {
        Some(p) => p,
        None => default_p0(&params, pbar0, cfg.mu_bar)?,
    };
    let regions = build_regions(
        &params,
        pbar0,
        p0,
        &RegionOptions {
            enforce_regime: false,
            mu_bar: cfg.mu_bar,
            ..RegionOptions::default()
        },
    )?;
    let opts = SearchOptions {
        tol: cfg.orbit_tol,
        flow_tol: cfg.tolerances(),
        ..SearchOptions::default()
    };
    let orbit = find_periodic(&params, &regions, &itinerary, &opts)?;
    let flow = Flow::with_tolerances(params, cfg.tolerances());
    let report = orbit.verify(&flow, 2)?;
    let tag = itinerary_tag(&itinerary);
    let out = Output::new(&cfg, &format!("find-periodic {itinerary}"))?;
    let mut csv = Vec::new();
    orbit.write_csv(&flow, &mut csv)?;
    out.write(&format!("periodic_{tag}.csv"), std::str::from_utf8(&csv)?)?;
    let text = format!("{}{}", orbit.to_text(), report.to_text());
    out.write(&format!("periodic_{tag}.txt"), &text)?;
    print!("{text}");
    if !report.passed {
        bail!(Failed(format!(
            "itinerary {itinerary} not confirmed over two periods"
        )));
    }
    Ok(())
}

struct ScanPoint {
    values: Vec<f64>,
    cfg: RunConfig,
}

fn scan_points(cfg: &RunConfig) -> Vec<ScanPoint> {
    let mut points = vec![ScanPoint {
        values: Vec::new(),
        cfg: cfg.clone(),
    }];
    for (axis, range) in &cfg.scan {
        let mut next = Vec::new();
        for p in &points {
            for v in range.values() {
                let mut c = p.cfg.clone();
                match axis {
                    Axis::N0 => c.n0 = Some(v),
                    Axis::N1 => c.n1 = Some(v),
                    Axis::Alpha => c.alpha = Some(v),
                    Axis::Beta => c.beta = Some(v),
                    // applied after alpha is known
                    Axis::Gap => {}
                    Axis::Pbar0 => c.pbar0 = Some(v),
                    Axis::PSymbols => c.p_symbols = v.round() as usize,
                }
                let mut values = p.values.clone();
                values.push(v);
                next.push(ScanPoint { values, cfg: c });
            }
        }
        points = next;
    }
    if let Some(i) = cfg.scan.iter().position(|(a, _)| *a == Axis::Gap) {
        for p in &mut points {
            p.cfg.beta = p.cfg.alpha.map(|a| a + p.values[i]);
        }
    }
    points
}

struct ScanResult {
    passed: bool,
    stage: String,
    min_margin: f64,
    p0: f64,
    m2star: f64,
}

fn scan_one(cfg: &RunConfig) -> ScanResult {
    let run = || -> Result<ScanResult> {
        let mut cfg = cfg.clone();
        let params = cfg.params()?;
        let pbar0 = resolve_anchor(&mut cfg, &params)?;
        let cert = certify_horseshoe(&params, pbar0, cfg.p0, &certify_options(&cfg))?;
        let m2star = cert
            .stage("regime")
            .and_then(|s| s.entries.iter().find(|e| e.0 == "m2star"))
            .and_then(|e| e.1.parse().ok())
            .unwrap_or(f64::NAN);
        Ok(ScanResult {
            passed: cert.passed,
            stage: cert.first_failure.unwrap_or("").to_string(),
            min_margin: cert.min_margin(),
            p0: cert.p0,
            m2star,
        })
    };
    run().unwrap_or_else(|e| ScanResult {
        passed: false,
        stage: format!("error: {}", e.to_string().replace(['"', ','], ";")),
        min_margin: f64::NAN,
        p0: f64::NAN,
        m2star: f64::NAN,
    })
}

pub fn scan(cfg: &RunConfig) -> Result<()> {
    if cfg.scan.is_empty() {
        bail!(UsageError("scan needs at least one scan_* range".into()));
    }
    let points = scan_points(cfg);
    let results: Vec<ScanResult> = points.par_iter().map(|p| scan_one(&p.cfg)).collect();
    let mut header: Vec<String> = cfg
        .scan
        .iter()
        .map(|(a, _)| a.key().trim_start_matches("scan_").to_string())
        .collect();
    header.extend(
        [
            "beta_used",
            "p0",
            "m2star",
            "passed",
            "failed_stage",
            "min_margin",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let mut body = row(&header);
    for (p, r) in points.iter().zip(&results) {
        let mut fields: Vec<String> = p.values.iter().map(|&v| num(v)).collect();
        fields.push(num(p.cfg.beta.unwrap_or(f64::NAN)));
        fields.push(num(r.p0));
        fields.push(num(r.m2star));
        fields.push(r.passed.to_string());
        fields.push(format!("\"{}\"", r.stage));
        fields.push(num(r.min_margin));
        body += &row(fields);
    }
    let out = Output::new(cfg, "scan")?;
    let path = out.write("scan.csv", &body)?;
    let passing = results.iter().filter(|r| r.passed).count();
    println!("{} of {} points certified", passing, results.len());
    println!("{}", path.display());
    Ok(())
}
