//! Chaotic dynamics of the periodically switched Nagumo oscillator
//! `x″ − g x + n(t) F(x) = 0`.
//!
//! The crate computes the threshold constants and time maps of the two
//! autonomous oscillators, integrates the switched flow, builds the
//! oriented rectangles of the horseshoe construction, certifies their
//! stretching relations numerically and searches for periodic solutions
//! with a prescribed itinerary of oscillation counts.

pub mod error;
pub mod flow;
pub mod horseshoe;
pub mod model;
pub mod nonlinearity;
pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod symbolic;
pub mod timemaps;

pub use error::{Error, Result};
pub use model::{horseshoe_constants, ModelParams, Oscillator, Thresholds};
pub use nonlinearity::{Clamped, Cubic, Nonlinearity};
