//! Helpers shared by the integration tests: the committed reference
//! configurations and an independent fixed-step integrator.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use nagumo_core::ModelParams;

/// Flat `key = value` pairs of a committed config file.
pub fn config(name: &str) -> HashMap<String, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    text.lines()
        .map(|l| l.split('#').next().unwrap().trim())
        .filter(|l| !l.is_empty())
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().trim_matches('"').to_string()))
        .collect()
}

pub struct Reference {
    pub params: ModelParams,
    pub pbar0: f64,
    pub p_symbols: usize,
    pub paths: usize,
    pub rtol: f64,
    pub atol: f64,
}

pub fn reference(name: &str) -> Reference {
    let c = config(name);
    let f = |k: &str| -> f64 {
        c.get(k)
            .unwrap_or_else(|| panic!("{name} lacks {k}"))
            .parse()
            .unwrap()
    };
    Reference {
        params: ModelParams::new(f("g"), f("a"), f("n0"), f("n1"), f("alpha"), f("beta")).unwrap(),
        pbar0: f("pbar0"),
        p_symbols: f("p_symbols") as usize,
        paths: f("paths") as usize,
        rtol: f("rtol"),
        atol: f("atol"),
    }
}

pub fn cubic(a: f64, s: f64) -> f64 {
    s * (s - a) * (1.0 - s)
}

/// The cubic with magnitude capped at 1 outside `[0, 1]`.
pub fn clamped_cubic(a: f64, s: f64) -> f64 {
    let f = cubic(a, s);
    if (0.0..=1.0).contains(&s) {
        f
    } else {
        f.clamp(-1.0, 1.0)
    }
}

pub fn cubic_primitive(a: f64, s: f64) -> f64 {
    -s.powi(4) / 4.0 + (1.0 + a) * s.powi(3) / 3.0 - a * s * s / 2.0
}

pub fn energy(g: f64, a: f64, mu: f64, x: f64, y: f64) -> f64 {
    0.5 * y * y - 0.5 * g * x * x + mu * cubic_primitive(a, x)
}

fn rk4_step(g: f64, a: f64, mu: f64, z: [f64; 2], h: f64) -> [f64; 2] {
    let f = |z: [f64; 2]| [z[1], g * z[0] - mu * clamped_cubic(a, z[0])];
    let k1 = f(z);
    let k2 = f([z[0] + 0.5 * h * k1[0], z[1] + 0.5 * h * k1[1]]);
    let k3 = f([z[0] + 0.5 * h * k2[0], z[1] + 0.5 * h * k2[1]]);
    let k4 = f([z[0] + h * k3[0], z[1] + h * k3[1]]);
    [
        z[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        z[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn rk4_run(g: f64, a: f64, mu: f64, z: [f64; 2], t: f64, n: usize) -> [f64; 2] {
    let h = t / n as f64;
    (0..n).fold(z, |z, _| rk4_step(g, a, mu, z, h))
}

/// Fixed-step RK4 with one Richardson extrapolation.
pub fn oracle_advance(g: f64, a: f64, mu: f64, z: [f64; 2], t: f64, h: f64) -> [f64; 2] {
    let n = (t / h).ceil().max(1.0) as usize;
    let coarse = rk4_run(g, a, mu, z, t, n);
    let fine = rk4_run(g, a, mu, z, t, 2 * n);
    [
        (16.0 * fine[0] - coarse[0]) / 15.0,
        (16.0 * fine[1] - coarse[1]) / 15.0,
    ]
}

/// First time the section `s(z)` changes sign along the fixed-step flow,
/// located by bisection on the length of a single step.
pub fn oracle_crossing<S: Fn([f64; 2]) -> f64>(
    g: f64,
    a: f64,
    mu: f64,
    z0: [f64; 2],
    h: f64,
    t_max: f64,
    section: S,
) -> Option<(f64, [f64; 2])> {
    let mut z = z0;
    let mut t = 0.0;
    let s0 = section(z0);
    // leave a start point lying on the section
    let mut sign = if s0 != 0.0 {
        s0 > 0.0
    } else {
        section(rk4_step(g, a, mu, z0, h)) > 0.0
    };
    while t < t_max {
        let next = rk4_step(g, a, mu, z, h);
        let s = section(next);
        if (s > 0.0) != sign {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (section(rk4_step(g, a, mu, z, mid)) > 0.0) == sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-16 {
                    break;
                }
            }
            return Some((t + lo, rk4_step(g, a, mu, z, lo)));
        }
        sign = s > 0.0 || (s == 0.0 && sign);
        z = next;
        t += h;
    }
    None
}
