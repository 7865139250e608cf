use std::fmt;

use thiserror::Error;

/// Errors raised by the estimators and the evaluation kit.
///
/// The algorithmic variants carry a stable kebab-case name (see
/// [`Error::name`]) that the CLI prints verbatim and maps to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid-dimension: {0}")]
    InvalidDimension(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("gap-not-found: no spectral gap reaches delta*d^2 (largest normalized gap {largest_gap:e}, delta {delta:e})")]
    GapNotFound { largest_gap: f64, delta: f64 },
    #[error("degenerate-spectrum: all eigenvalue gaps are zero")]
    DegenerateSpectrum,
    #[error("insufficient-data: {0}")]
    InsufficientData(String),
    #[error("no-signal: {0}")]
    NoSignal(String),
    #[error("invalid-weight: {0}")]
    InvalidWeight(String),
    #[error("undefined-beta: forecast vector is identically zero")]
    UndefinedBeta,
    #[error("degenerate-variance: {0}")]
    DegenerateVariance(String),
    #[error("degenerate-weights: all consolidation weights are zero")]
    DegenerateWeights,
    #[error("parse: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// IO, parse and shape problems.
    Usage,
    /// Typed algorithmic failure the caller can react to.
    Algorithmic,
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::Numeric(_) => "numeric",
            Error::GapNotFound { .. } => "gap-not-found",
            Error::DegenerateSpectrum => "degenerate-spectrum",
            Error::InsufficientData(_) => "insufficient-data",
            Error::NoSignal(_) => "no-signal",
            Error::InvalidWeight(_) => "invalid-weight",
            Error::UndefinedBeta => "undefined-beta",
            Error::DegenerateVariance(_) => "degenerate-variance",
            Error::DegenerateWeights => "degenerate-weights",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidDimension(_) | Error::Parse(_) | Error::Io(_) => ErrorClass::Usage,
            _ => ErrorClass::Algorithmic,
        }
    }

    pub(crate) fn dim(msg: impl fmt::Display) -> Self {
        Error::InvalidDimension(msg.to_string())
    }
}

pub(crate) fn ensure_finite(m: &nalgebra::DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} contains non-finite entries")))
    }
}

pub(crate) fn ensure_same_shape(
    a: &nalgebra::DMatrix<f64>,
    b: &nalgebra::DMatrix<f64>,
    what: &str,
) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::dim(format!(
            "{what}: shape {:?} does not match {:?}",
            a.shape(),
            b.shape()
        )))
    }
}
