//! Weighted Galerkin solver for the microscopic FENE Fokker-Planck equation
//! on the ball `B(0, sqrt(b))`, together with numerical checks of its
//! analytic properties: mass conservation, positivity, energy bounds, the
//! boundary requirement `f / d -> 0` and the loss of uniqueness when that
//! requirement is relaxed.

pub mod diagnostics;
pub mod error;
pub mod galerkin;
pub mod geometry;
pub mod scenarios;
pub mod weighted;

pub use error::{Error, Result};
