use thiserror::Error;

/// Errors raised by the solver and its verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("condition b>2 violated: b = {b}")]
    ConditionB { b: f64 },

    #[error("point outside the closed ball: |m|^2 = {norm_sq} > b = {b}")]
    Domain { norm_sq: f64, b: f64 },

    #[error("potential is singular at |m|^2 = b")]
    Singularity,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("velocity gradient is not trace free: tr = {trace:e} at t = {t}")]
    TraceNotZero { trace: f64, t: f64 },

    #[error("weight exponent {exponent} is not integrable (needs > -1)")]
    Integrability { exponent: f64 },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("basis is rank deficient (Gram condition number {condition:e})")]
    Basis { condition: f64 },

    #[error("exponent mismatch: basis built for {basis}, operator needs {requested}")]
    ExponentMismatch { basis: f64, requested: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("Picard iteration is not contracting (factor {factor:.3}, window {tau:e})")]
    NonContraction { factor: f64, tau: f64 },

    #[error("coercivity certificate failed: C1 = {c1:e}")]
    Certificate { c1: f64 },

    #[error("gamma = {gamma} outside the window ({lower}, 1)")]
    GammaWindow { gamma: f64, lower: f64 },

    #[error("inadmissible initial data: {0}")]
    Inadmissible(String),

    #[error("boundary forcing does not vanish at t = 0 (max |g(0,.)| = {max:e})")]
    ForcingAtZero { max: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("positivity certificate search failed: {0}")]
    CertificateSearch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that stem from user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::ConditionB { .. }
                | Error::InvalidParameter(_)
                | Error::TraceNotZero { .. }
                | Error::GammaWindow { .. }
                | Error::Inadmissible(_)
                | Error::ForcingAtZero { .. }
                | Error::Unsupported(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
