//! Output files carrying the effective configuration as a `#` header.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::RunConfig;

pub struct Output {
    dir: PathBuf,
    header: String,
}

impl Output {
    /// Creates the output directory of `cfg`.
    pub fn new(cfg: &RunConfig, command: &str) -> Result<Self> {
        fs::create_dir_all(&cfg.out)
            .with_context(|| format!("cannot create {}", cfg.out.display()))?;
        let mut header = format!("# command = \"{command}\"\n");
        for line in cfg.render().lines() {
            header.push_str("# ");
            header.push_str(line);
            header.push('\n');
        }
        Ok(Self {
            dir: cfg.out.clone(),
            header,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `body` below the config header and returns the file path.
    pub fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut text = String::with_capacity(self.header.len() + body.len());
        text.push_str(&self.header);
        text.push_str(body);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// Float formatting shared by every CSV.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Joins formatted fields into one CSV row with a trailing newline.
pub fn row<I, S>(fields: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut s = String::new();
    for (i, f) in fields.into_iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(f.as_ref());
    }
    s.push('\n');
    s
}

/// Drops the `#` header lines of an output file.
pub fn strip_header(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter(|l| !l.starts_with('#'))
}
