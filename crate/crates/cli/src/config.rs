//! Run configuration: a flat `key = value` file with `#` comments.
//!
//! The file is read as a TOML table, so strings may be quoted and numbers
//! written either as integers or floats. Every key is optional at parse
//! time; commands demand what they need through the `require_*` accessors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nagumo_core::ode::Tolerances;
use nagumo_core::ModelParams;
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Syntax { path: String, message: String },
    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: key `{key}`: {message}")]
    BadValue {
        path: String,
        line: usize,
        key: String,
        message: String,
    },
    #[error("missing config key `{0}`")]
    Missing(&'static str),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

/// Parameters swept by `scan`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N0,
    N1,
    Alpha,
    Beta,
    Gap,
    Pbar0,
    PSymbols,
}

impl Axis {
    pub const ALL: [Axis; 7] = [
        Axis::N0,
        Axis::N1,
        Axis::Alpha,
        Axis::Beta,
        Axis::Gap,
        Axis::Pbar0,
        Axis::PSymbols,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            Axis::N0 => "scan_n0",
            Axis::N1 => "scan_n1",
            Axis::Alpha => "scan_alpha",
            Axis::Beta => "scan_beta",
            Axis::Gap => "scan_gap",
            Axis::Pbar0 => "scan_pbar0",
            Axis::PSymbols => "scan_p_symbols",
        }
    }
}

/// `count` equispaced values from `lo` to `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub g: Option<f64>,
    pub a: Option<f64>,
    pub n0: Option<f64>,
    pub n1: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub pbar0: Option<f64>,
    pub p0: Option<f64>,
    pub mu_bar: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub paths: usize,
    pub p_symbols: usize,
    /// Largest shooting defect accepted for periodic orbits.
    pub orbit_tol: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub blocks: usize,
    /// Energy levels per weight for level-set output.
    pub levels: usize,
    /// Random queries of the time-map oracle table.
    pub samples: usize,
    pub scan: Vec<(Axis, Range)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tol = Tolerances::default();
        Self {
            g: None,
            a: None,
            n0: None,
            n1: None,
            alpha: None,
            beta: None,
            pbar0: None,
            p0: None,
            mu_bar: None,
            rtol: tol.rtol,
            atol: tol.atol,
            h_max: tol.h_max,
            paths: 64,
            p_symbols: 2,
            orbit_tol: 1e-9,
            seed: 0,
            out: PathBuf::from("out"),
            x0: None,
            y0: None,
            blocks: 3,
            levels: 9,
            samples: 20,
            scan: Vec::new(),
        }
    }
}

fn line_of(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses configuration text; `origin` names it in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax {
                path: origin.to_string(),
                message: e.to_string().trim_end().replace('\n', " "),
            })?;
        let mut cfg = Self::default();
        for (key, value) in &table {
            let bad = |message: String| ConfigError::BadValue {
                path: origin.to_string(),
                line: line_of(text, key),
                key: key.clone(),
                message,
            };
            let real = || -> Result<f64, ConfigError> {
                match value {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    other => Err(bad(format!(
                        "expected a number, found {}",
                        other.type_str()
                    ))),
                }
            };
            let count = || -> Result<usize, ConfigError> {
                match value {
                    Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                    other => Err(bad(format!(
                        "expected a nonnegative integer, found {other}"
                    ))),
                }
            };
            match key.as_str() {
                "g" => cfg.g = Some(real()?),
                "a" => cfg.a = Some(real()?),
                "n0" => cfg.n0 = Some(real()?),
                "n1" => cfg.n1 = Some(real()?),
                "alpha" => cfg.alpha = Some(real()?),
                "beta" => cfg.beta = Some(real()?),
                "pbar0" => cfg.pbar0 = Some(real()?),
                "p0" => cfg.p0 = Some(real()?),
                "mu_bar" => cfg.mu_bar = Some(real()?),
                "rtol" => cfg.rtol = real()?,
                "atol" => cfg.atol = real()?,
                "h_max" => cfg.h_max = real()?,
                "paths" => cfg.paths = count()?,
                "p_symbols" => cfg.p_symbols = count()?,
                "orbit_tol" => cfg.orbit_tol = real()?,
                "seed" => cfg.seed = count()? as u64,
                "x0" => cfg.x0 = Some(real()?),
                "y0" => cfg.y0 = Some(real()?),
                "blocks" => cfg.blocks = count()?,
                "levels" => cfg.levels = count()?,
                "samples" => cfg.samples = count()?,
                "out" => match value {
                    Value::String(s) => cfg.out = PathBuf::from(s),
                    other => return Err(bad(format!("expected a string, found {other}"))),
                },
                k => match Axis::ALL.iter().find(|ax| ax.key() == k) {
                    Some(&axis) => {
                        let items = value
                            .as_array()
                            .filter(|v| v.len() == 3)
                            .ok_or_else(|| bad("expected [lo, hi, count]".into()))?;
                        let num = |v: &Value| v.as_float().or(v.as_integer().map(|i| i as f64));
                        let (Some(lo), Some(hi), Some(n)) =
                            (num(&items[0]), num(&items[1]), items[2].as_integer())
                        else {
                            return Err(bad("expected [lo, hi, count] with integer count".into()));
                        };
                        if n < 0 {
                            return Err(bad("negative count".into()));
                        }
                        cfg.scan.push((
                            axis,
                            Range {
                                lo,
                                hi,
                                count: n as usize,
                            },
                        ));
                    }
                    None => {
                        return Err(ConfigError::UnknownKey {
                            path: origin.to_string(),
                            line: line_of(text, key),
                            key: key.clone(),
                        })
                    }
                },
            }
        }
        // keep scan axes in a fixed order regardless of file order
        cfg.scan
            .sort_by_key(|(ax, _)| Axis::ALL.iter().position(|a| a == ax));
        if cfg.scan.iter().any(|(a, _)| *a == Axis::Beta)
            && cfg.scan.iter().any(|(a, _)| *a == Axis::Gap)
        {
            return Err(ConfigError::Invalid(
                "scan_beta and scan_gap are exclusive".into(),
            ));
        }
        Ok(cfg)
    }

    /// Fills every unset physical key from `defaults`.
    pub fn with_defaults(mut self, defaults: &RunConfig) -> Self {
        macro_rules! fill {
            ($($f:ident),*) => { $( if self.$f.is_none() { self.$f = defaults.$f; } )* };
        }
        fill!(g, a, n0, n1, alpha, beta, pbar0, p0, mu_bar, x0, y0);
        self
    }

    pub fn require(&self, value: Option<f64>, key: &'static str) -> Result<f64, ConfigError> {
        value.ok_or(ConfigError::Missing(key))
    }

    pub fn params(&self) -> Result<ModelParams, ConfigError> {
        let p = ModelParams::new(
            self.require(self.g, "g")?,
            self.require(self.a, "a")?,
            self.require(self.n0, "n0")?,
            self.require(self.n1, "n1")?,
            self.require(self.alpha, "alpha")?,
            self.require(self.beta, "beta")?,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(p)
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rtol: self.rtol,
            atol: self.atol,
            h_max: self.h_max,
        }
    }

    /// The effective configuration as `key = value` lines, in a fixed order,
    /// parseable by [`RunConfig::parse`].
    pub fn render(&self) -> String {
        let mut s = String::new();
        let opt = |s: &mut String, key: &str, v: Option<f64>| {
            if let Some(v) = v {
                let _ = writeln!(s, "{key} = {}", fmt_real(v));
            }
        };
        opt(&mut s, "g", self.g);
        opt(&mut s, "a", self.a);
        opt(&mut s, "n0", self.n0);
        opt(&mut s, "n1", self.n1);
        opt(&mut s, "alpha", self.alpha);
        opt(&mut s, "beta", self.beta);
        opt(&mut s, "pbar0", self.pbar0);
        opt(&mut s, "p0", self.p0);
        opt(&mut s, "mu_bar", self.mu_bar);
        let _ = writeln!(s, "rtol = {}", fmt_real(self.rtol));
        let _ = writeln!(s, "atol = {}", fmt_real(self.atol));
        let _ = writeln!(s, "h_max = {}", fmt_real(self.h_max));
        let _ = writeln!(s, "paths = {}", self.paths);
        let _ = writeln!(s, "p_symbols = {}", self.p_symbols);
        let _ = writeln!(s, "orbit_tol = {}", fmt_real(self.orbit_tol));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {:?}", self.out.display().to_string());
        opt(&mut s, "x0", self.x0);
        opt(&mut s, "y0", self.y0);
        let _ = writeln!(s, "blocks = {}", self.blocks);
        let _ = writeln!(s, "levels = {}", self.levels);
        let _ = writeln!(s, "samples = {}", self.samples);
        for (axis, r) in &self.scan {
            let _ = writeln!(
                s,
                "{} = [{}, {}, {}]",
                axis.key(),
                fmt_real(r.lo),
                fmt_real(r.hi),
                r.count
            );
        }
        s
    }
}

/// Shortest representation that parses back to the same float, always
/// with a decimal point or exponent.
pub fn fmt_real(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) || !v.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}
