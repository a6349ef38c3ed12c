//! Weighted Galerkin discretization: a zero-trace basis built from Jacobi
//! polynomials and harmonic polynomials, assembly of the weighted forms,
//! Garding constants, Crank-Nicolson time stepping and the Picard
//! fixed-point iteration used as an independent solution path.

mod assemble;
mod basis;
mod garding;
mod time;

pub use assemble::{assemble, radial_sign_forms, AssembledOperator, OperatorParts, Weighting};
pub use basis::{boundary_power, BasisFunction, BasisOptions, BasisSet, Family, Tabulation};
pub use garding::{garding_constants, min_generalized_eigenvalue, GardingConstants};
pub use time::{
    cn_step, integrate, picard_solve, time_grid, Lift, LoadFn, PicardReport, PicardWindow, SolutionTrajectory,
};
