use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure surfaced by the numerical pipeline.
///
/// Report-style operations (stretch verification, confinement, itinerary
/// checks) never return these for a *negative* outcome; they encode it in
/// their report instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no nontrivial equilibria: mu = {mu} does not exceed m0* = {m0star}")]
    NoEquilibria { mu: f64, m0star: f64 },
    #[error("hypothesis H0 violated: integral of F over [0,1] is {integral} <= 0")]
    HypothesisH0Violated { integral: f64 },
    #[error("mu = {mu} is not above the homoclinic threshold m1* = {m1star}")]
    BelowHomoclinicThreshold { mu: f64, m1star: f64 },
    #[error("{what} = {value} lies outside ({lo}, {hi})")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("weight too large: n0 * Lambda = {product} >= g = {g}")]
    WeightTooLarge { product: f64, g: f64 },
    #[error("invalid regime: {0}")]
    InvalidRegime(String),
    #[error(
        "level through x0 = {x0} is not a closed orbit (energy {energy} outside ({center}, 0))"
    )]
    NotClosedOrbit { x0: f64, energy: f64, center: f64 },
    #[error("no gap: {0}")]
    NoGap(String),
    #[error("energy {energy} outside the band ({lo}, {hi})")]
    EnergyOutOfBand { energy: f64, lo: f64, hi: f64 },
    #[error("quadrature did not converge: last relative change {rel_change:e}")]
    QuadratureFailure { rel_change: f64 },
    #[error("step size underflow at t = {t} (x = {x}, y = {y})")]
    StepFailure { t: f64, x: f64, y: f64 },
    #[error("orbit passes within {distance:e} of the rotation center at t = {t}")]
    CenterSingularity { t: f64, distance: f64 },
    #[error("tangential axis contact at t = {t} (slope {slope:e})")]
    DegenerateCrossing { t: f64, slope: f64 },
    #[error("regime violation: {0}")]
    RegimeViolation(String),
    #[error("anchor order violation: {0}")]
    AnchorOrderViolation(String),
    #[error("inclusion A in N_c fails at ({x}, {y})")]
    InclusionFailure { x: f64, y: f64 },
    #[error("chart inversion failed at (E1 = {e1}, E0 = {e0}): {reason}")]
    ChartInversionFailure { e1: f64, e0: f64, reason: String },
    #[error("no orbit found; best partial match depth {depth}")]
    NotFound { depth: usize },
    #[error("Newton polish diverged: {0}")]
    PolishDiverged(String),
}
