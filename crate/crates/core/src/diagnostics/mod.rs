//! Run configuration, scenario orchestration and the CSV/JSON artifacts.
//!
//! A run is described by one TOML file plus `key=value` overrides. Outputs
//! are deterministic: floats are written with 17 significant digits and no
//! timing or host information enters the files.

mod config;
mod output;
mod run;

pub use config::{apply_override, NonuniqueSection, RunConfig, Scenario, SweepSection, OUTPUT_ROOT_VAR};
pub use output::{fmt_f64, kept_indices, series_csv, thinning_stride, trace_csv, MAX_ROWS, SERIES_HEADER};
pub use run::{
    check, run, sweep, Status, SuiteResult, MASS_TOLERANCE, POSITIVITY_TOLERANCE, SOLVER_TOLERANCE, WEAK_TOLERANCE,
};
