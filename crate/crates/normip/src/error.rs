use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("audit failed: {0}")]
    AuditFailed(String),

    #[error("unbounded gauge: {0}")]
    UnboundedGauge(String),

    #[error("enumeration exceeded the cap of {cap} items")]
    EnumerationCap { cap: usize },

    #[error("representation mismatch: {0}")]
    RepMismatch(String),

    #[error("no split within budget: achieved {achieved}")]
    SplitFailed { achieved: f64 },

    #[error("solver did not converge ({what}); best value {best}")]
    NoConvergence { what: String, best: f64 },

    #[error("linear program infeasible")]
    Infeasible,

    #[error("linear program unbounded")]
    Unbounded,

    #[error("quantizer overflow: |{value}| exceeds guard bound {bound}")]
    QuantizerOverflow { value: f64, bound: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if let Some(i) = xs.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{what}[{i}] = {}", xs[i])));
    }
    Ok(())
}

pub(crate) fn check_dim(xs: &[f64], n: usize) -> Result<()> {
    if xs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: xs.len() });
    }
    Ok(())
}
