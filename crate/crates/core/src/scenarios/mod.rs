//! Problem drivers: the sharp-boundary Fokker-Planck solve, the relaxed
//! problem with prescribed boundary forcing, the positivity certificate and
//! the sweep over the spring parameter `b`.

mod certificate;
mod checks;
mod data;
mod fpf;
mod monitor;
mod nonunique;
mod sweep;
mod weak;

pub use certificate::{positivity_certificate, quadratic_bound, transformed_coefficient, MaximumPrincipleCert};
pub use checks::{
    embedding_ratios, equivalence_bounds, sign_identity, EmbeddingBranch, EquivalenceBounds, SignIdentityReport,
    EQUIVALENCE_DELTA,
};
pub use data::{equilibrium_normalization, Forcing, InitialData, Profile, Resolution};
pub use fpf::{check_positivity, project_initial, solve_fpf, FpfProblem, FpfReport, PositivityReport};
pub use monitor::{decay_exponent, trace_profile, Monitor, SeriesRow};
pub use nonunique::{default_gamma, gamma_lower, separation, solve_nonunique, NonUniqueProblem, NonUniqueReport};
pub use sweep::{threshold_sweep, SweepRow, FIT_TAIL};
pub use weak::{weak_residual, TestFunction, TestSet, WeakResidual};
