use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument outside the domain of {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("overflow guard in {op}: {detail}")]
    Overflow { op: &'static str, detail: String },

    #[error("quadrature did not converge (estimated error {estimate:e} > tolerance {tol:e})")]
    NoConvergence { estimate: f64, tol: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:e}, max eigenvalue {max_eig:e}")]
    NotPsd { min_eig: f64, max_eig: f64 },

    #[error("sum of squared transforms vanishes at scale j = {j}")]
    ZeroTransformSum { j: f64 },

    #[error("scattering intensity is undefined at zero frequency")]
    ZeroFrequency,

    #[error("point pattern is empty")]
    EmptyPattern,

    #[error("window too small: {detail}")]
    WindowTooSmall { detail: String },

    #[error("scale grid is degenerate (zero variance or fewer than two scales)")]
    DegenerateScales,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("matching failed: {proposals} proposal points for {sites} lattice sites")]
    Unmatchable { proposals: usize, sites: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { op, detail: detail.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
