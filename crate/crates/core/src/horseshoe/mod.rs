//! The horseshoe construction: oriented rectangles in energy coordinates,
//! symbol sets defined by the rotation angle, stretching verification and
//! the end-to-end certificate.

mod certify;
mod regions;
mod stretch;

use std::f64::consts::PI;

pub use certify::{certify_horseshoe, Certificate, CertifyOptions, Stage};
pub use regions::{
    build_regions, check_separation_claim, default_p0, sample_crossing_path, CrossingPath, Rect,
    RegionOptions, RegionSet, Separation, Side, PATH_GRADING,
};
pub use stretch::{
    band_crossings, composite_strip, verify_stretch, MapId, PathRecord, StretchOptions,
    StretchReport, Strip,
};

use crate::error::Result;
use crate::flow::{Flow, PhaseState};

/// Angle band `[−(4j+1)π/2, −2jπ]` of symbol `j`: `j` full turns plus up to
/// a quarter turn, i.e. `j + 1` maxima of `x` during the high phase.
pub fn symbol_band(j: usize) -> (f64, f64) {
    let j = j as f64;
    (-(4.0 * j + 1.0) * PI / 2.0, -2.0 * j * PI)
}

/// Symbol `j ∈ 1..=p` whose band contains `theta`.
pub fn symbol_of_angle(theta: f64, p_symbols: usize) -> Option<usize> {
    (1..=p_symbols).find(|&j| {
        let (lo, hi) = symbol_band(j);
        theta >= lo && theta <= hi
    })
}

/// Symbol of `z` from its high-phase rotation angle.
pub fn classify_symbol(flow: &Flow, z: PhaseState, p_symbols: usize) -> Result<Option<usize>> {
    Ok(symbol_of_angle(flow.theta_alpha(z)?, p_symbols))
}
