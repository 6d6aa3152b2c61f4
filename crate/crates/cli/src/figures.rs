//! Plot-ready data for the five figures and for level sets at configured
//! weights.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use nagumo_core::horseshoe::{build_regions, sample_crossing_path, Rect, RegionOptions, RegionSet};
use nagumo_core::{roots, Oscillator};

use crate::config::RunConfig;
use crate::output::{num, row, Output};

/// Caption parameters of figure `k`; the configuration overrides them.
pub fn defaults(k: usize) -> Result<RunConfig> {
    let mut d = RunConfig::default();
    match k {
        1 => {
            d.g = Some(0.5);
            d.a = Some(0.4);
            d.n0 = Some(0.8);
            d.n1 = Some(16.0);
        }
        2 => {
            d.g = Some(0.1);
            d.a = Some(0.4);
            d.n0 = Some(0.1);
            d.n1 = Some(10.0);
        }
        3..=5 => {
            d.g = Some(0.1);
            d.a = Some(0.4);
            d.n0 = Some(0.1);
            d.n1 = Some(10.0);
            d.alpha = Some(3.0);
            d.beta = Some(6.0);
            d.pbar0 = Some(0.07);
            d.p0 = Some(0.1);
        }
        _ => bail!(crate::UsageError(format!(
            "figure number must be 1 to 5, got {k}"
        ))),
    }
    d.levels = 9;
    Ok(d)
}

pub fn emit(k: usize, cfg: &RunConfig, out: &Output) -> Result<Vec<String>> {
    match k {
        1 => fig1(cfg, out),
        2 => {
            let osc = Oscillator::new(
                cfg.require(cfg.g, "g")?,
                nagumo_core::Cubic::new(cfg.require(cfg.a, "a")?),
            );
            let body = level_sets(&osc, &[10.0, 0.1], cfg.levels);
            out.write("fig2.csv", &body)?;
            Ok(vec!["fig2.csv".into()])
        }
        3 => fig3(cfg, out),
        4 => fig4(cfg, out),
        5 => fig5(cfg, out),
        _ => unreachable!("checked by defaults"),
    }
}

fn meta_line(s: &mut String, key: &str, v: f64) {
    let _ = writeln!(s, "{key} = {}", num(v));
}

fn fig1(cfg: &RunConfig, out: &Output) -> Result<Vec<String>> {
    let g = cfg.require(cfg.g, "g")?;
    let a = cfg.require(cfg.a, "a")?;
    let n0 = cfg.require(cfg.n0, "n0")?;
    let n1 = cfg.require(cfg.n1, "n1")?;
    let osc = Oscillator::new(g, nagumo_core::Cubic::new(a));
    let curve = |mu: f64, s: f64| -g * s + mu * nagumo_core::Nonlinearity::value(&osc.nl, s);
    let mut body = row(["s", "curve_n0", "curve_n1"]);
    let n = 1000;
    for i in 0..=n {
        let s = i as f64 / n as f64;
        body += &row([num(s), num(curve(n0, s)), num(curve(n1, s))]);
    }
    out.write("fig1.csv", &body)?;

    let mut meta = String::new();
    meta_line(&mut meta, "m0star", osc.m0star());
    for (name, mu) in [("n0", n0), ("n1", n1)] {
        match osc.equilibria(mu) {
            Ok((lo, hi)) => {
                meta_line(&mut meta, &format!("{name}_zero_1"), lo);
                meta_line(&mut meta, &format!("{name}_zero_2"), hi);
            }
            Err(_) => {
                let _ = writeln!(meta, "{name}_zeros = none");
            }
        }
    }
    out.write("fig1_meta.txt", &meta)?;
    Ok(vec!["fig1.csv".into(), "fig1_meta.txt".into()])
}

/// Points of `{ℰ^μ = e, 0 ≤ x ≤ 1}` as rows `component,branch,x,y`.
///
/// A component is a maximal run of the grid where the level is reachable;
/// its turning points on `y = 0` are located exactly.
fn level_curve(osc: &Oscillator, mu: f64, e: f64, grid: usize) -> Vec<(usize, i8, f64, f64)> {
    let radicand = |x: f64| 2.0 * (e - osc.energy(mu, x, 0.0));
    let xs: Vec<f64> = (0..=grid).map(|i| i as f64 / grid as f64).collect();
    let mut pieces: Vec<Vec<f64>> = Vec::new();
    let mut current: Vec<f64> = Vec::new();
    for w in xs.windows(2).enumerate() {
        let (i, w) = w;
        let (r0, r1) = (radicand(w[0]), radicand(w[1]));
        if i == 0 && r0 >= 0.0 {
            current.push(w[0]);
        }
        if (r0 >= 0.0) != (r1 >= 0.0) {
            let x = roots::bisect(radicand, w[0], w[1]).unwrap_or(w[1]);
            current.push(x);
            if r0 >= 0.0 {
                pieces.push(std::mem::take(&mut current));
            }
        }
        if r1 >= 0.0 {
            current.push(w[1]);
        }
    }
    if !current.is_empty() {
        pieces.push(current);
    }
    let mut rows = Vec::new();
    for (c, xs) in pieces.iter().enumerate() {
        for &x in xs {
            rows.push((c, 1, x, radicand(x).max(0.0).sqrt()));
        }
        for &x in xs.iter().rev() {
            rows.push((c, -1, x, -radicand(x).max(0.0).sqrt()));
        }
    }
    rows
}

/// Ladder of `count` energies strictly inside `(min_x V, −min_x V / 2)` on
/// `[0,1]`, plus the zero level.
fn energy_ladder(osc: &Oscillator, mu: f64, count: usize) -> Vec<f64> {
    let floor = (0..=1000)
        .map(|i| osc.energy(mu, i as f64 / 1000.0, 0.0))
        .fold(f64::INFINITY, f64::min);
    let top = -0.5 * floor;
    let mut levels: Vec<f64> = (1..=count)
        .map(|i| floor + (top - floor) * i as f64 / (count + 1) as f64)
        .collect();
    if !levels.contains(&0.0) {
        levels.push(0.0);
    }
    levels.sort_by(f64::total_cmp);
    levels
}

/// Level lines of `ℰ^μ` for each weight in `mus` at an energy ladder.
pub fn level_sets(osc: &Oscillator, mus: &[f64], count: usize) -> String {
    let mut body = row(["mu", "level", "component", "branch", "x", "y"]);
    for &mu in mus {
        for e in energy_ladder(osc, mu, count) {
            for (c, b, x, y) in level_curve(osc, mu, e, 400) {
                body += &row([
                    num(mu),
                    num(e),
                    c.to_string(),
                    b.to_string(),
                    num(x),
                    num(y),
                ]);
            }
        }
    }
    body
}

fn regions_for(cfg: &RunConfig) -> Result<RegionSet> {
    let params = cfg.params()?;
    let pbar0 = cfg.require(cfg.pbar0, "pbar0")?;
    let p0 = match cfg.p0 {
        Some(p) => p,
        None => nagumo_core::horseshoe::default_p0(&params, pbar0, cfg.mu_bar)?,
    };
    let opts = RegionOptions {
        enforce_regime: false,
        mu_bar: cfg.mu_bar,
        ..RegionOptions::default()
    };
    Ok(build_regions(&params, pbar0, p0, &opts)?)
}

/// The arc `{ℰ^μ = e, x ≥ x_from, y ≥ 0}` from `x_from` to its turning
/// point, or `None` when the level does not reach `x_from`.
fn upper_arc(osc: &Oscillator, mu: f64, e: f64, x_from: f64, n: usize) -> Option<Vec<(f64, f64)>> {
    let radicand = |x: f64| 2.0 * (e - osc.energy(mu, x, 0.0));
    if radicand(x_from) < 0.0 {
        return None;
    }
    let mut hi = x_from;
    while radicand(hi) >= 0.0 && hi < 2.0 {
        hi += 1e-3;
    }
    let turn = roots::bisect(radicand, hi - 1e-3, hi).ok()?;
    Some(
        (0..=n)
            .map(|i| {
                let x = x_from + (turn - x_from) * i as f64 / n as f64;
                (x, radicand(x).max(0.0).sqrt())
            })
            .collect(),
    )
}

fn fig3(cfg: &RunConfig, out: &Output) -> Result<Vec<String>> {
    let r = regions_for(cfg)?;
    let osc = r.params.oscillator();
    let n1 = r.params.n1;
    let mut body = row(["curve", "x", "y"]);
    let push = |body: &mut String, name: &str, x: f64, y: f64| {
        *body += &row([name.to_string(), num(x), num(y)]);
    };
    for (name, e) in [("E1_eq_c", r.c), ("E1_eq_0", 0.0)] {
        for (_, _, x, y) in level_curve(&osc, n1, e, 400) {
            push(&mut body, name, x, y);
        }
    }
    let inner = upper_arc(&osc, n1, r.c, r.a_n1, 200);
    let outer = upper_arc(&osc, n1, 0.0, r.a_n1, 200);
    if let (Some(inner), Some(outer)) = (inner, outer) {
        let mut ring: Vec<(f64, f64)> = inner.clone();
        ring.extend(outer.iter().rev().copied());
        ring.push(inner[0]);
        for (x, y) in ring {
            push(&mut body, "N_c", x, y);
        }
    }
    for z in sample_crossing_path(&r, 0.5, 200)? {
        push(&mut body, "path", z.x, z.y);
    }
    out.write("fig3.csv", &body)?;

    let mut meta = String::new();
    meta_line(&mut meta, "c", r.c);
    meta_line(&mut meta, "a_n1", r.a_n1);
    meta_line(&mut meta, "E1_at_a_n1", r.center_energy);
    meta_line(&mut meta, "pbar0", r.pbar0);
    meta_line(&mut meta, "p0", r.p0);
    out.write("fig3_meta.txt", &meta)?;
    Ok(vec!["fig3.csv".into(), "fig3_meta.txt".into()])
}

fn fig4(cfg: &RunConfig, out: &Output) -> Result<Vec<String>> {
    let r = regions_for(cfg)?;
    let osc = r.params.oscillator();
    let n0 = r.params.n0;
    let mut body = row(["curve", "component", "branch", "x", "y"]);
    for (name, e) in [("E0_through_p0", r.e0_hi), ("E0_through_p1", r.e0_lo)] {
        for (c, b, x, y) in level_curve(&osc, n0, e, 400) {
            body += &row([
                name.to_string(),
                c.to_string(),
                b.to_string(),
                num(x),
                num(y),
            ]);
        }
    }
    out.write("fig4.csv", &body)?;
    let mut meta = String::new();
    meta_line(&mut meta, "p0", r.p0);
    meta_line(&mut meta, "p1", r.p1);
    meta_line(&mut meta, "E0_hi", r.e0_hi);
    meta_line(&mut meta, "E0_lo", r.e0_lo);
    out.write("fig4_meta.txt", &meta)?;
    Ok(vec!["fig4.csv".into(), "fig4_meta.txt".into()])
}

fn fig5(cfg: &RunConfig, out: &Output) -> Result<Vec<String>> {
    let r = regions_for(cfg)?;
    let mut body = row(["curve", "x", "y"]);
    let mut ymax: f64 = 0.0;
    for rect in [Rect::A, Rect::B] {
        for z in r.boundary(rect, 100)? {
            ymax = ymax.max(z.y.abs());
            body += &row([rect.name().to_string(), num(z.x), num(z.y)]);
        }
    }
    let ymax = 1.1 * ymax;
    for (name, x) in [("x_eq_a", r.params.a), ("x_eq_a_n1", r.a_n1)] {
        for y in [-ymax, ymax] {
            body += &row([name.to_string(), num(x), num(y)]);
        }
    }
    out.write("fig5.csv", &body)?;
    let mut meta = String::new();
    meta_line(&mut meta, "pbar0_plus", r.pbar0_plus);
    meta_line(&mut meta, "a_n1", r.a_n1);
    meta_line(&mut meta, "inclusion_margin", r.inclusion_margin);
    let _ = writeln!(meta, "a_n1_below_pbar0_plus = {}", r.a_n1 <= r.pbar0_plus);
    out.write("fig5_meta.txt", &meta)?;
    Ok(vec!["fig5.csv".into(), "fig5_meta.txt".into()])
}
