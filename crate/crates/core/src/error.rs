use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size {0} is too small or odd (need an even size >= {1})")]
    GridTooSmall(usize, usize),

    #[error("grid mismatch: {0} vs {1} points")]
    GridMismatch(usize, usize),

    #[error("density is not strictly positive (min sample {0:e})")]
    NonPositiveDensity(f64),

    #[error("density has negative sample {0:e} below tolerance")]
    NegativeDensity(f64),

    #[error("Gibbs exponent {0:.3} exceeds the overflow guard")]
    OverflowRisk(f64),

    #[error("fixed-point iteration did not converge in {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("state is not stationary (residual {0:e})")]
    NotStationary(f64),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
