use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integral does not converge: {0}")]
    NonIntegrable(String),
    #[error("invalid integration region: {0}")]
    InvalidRegion(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("kernel not evaluable at lag {lag}")]
    KernelDomain { lag: f64 },
    #[error("kernel has no density phi'")]
    MissingDensity,
    #[error("truncation condition fails: band masses ({neg}, {pos}) on (a, b) = ({a}, {b})")]
    TruncationViolated { a: f64, b: f64, neg: f64, pos: f64 },
    #[error("zeta = {zeta} outside the reachable range of the tail law: {reason}")]
    ZetaOutOfRange { zeta: f64, reason: String },
    #[error("Girsanov factor {value} <= 0 for jump {size} at t = {time}")]
    NonPositiveAlpha { time: f64, size: f64, value: f64 },
    #[error("argument {0} outside the domain (-1, inf)")]
    DomainError(f64),
    #[error("dominance W <= |P| g violated at t = {time}, x = {x}: W = {w}, bound = {bound}")]
    DominanceViolated { time: f64, x: f64, w: f64, bound: f64 },
    #[error("bin {bin} holds {count} samples, below the floor of {floor}")]
    InsufficientSamples { bin: usize, count: usize, floor: usize },
    #[error("config error: {0}")]
    Config(String),
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

pub type Result<T> = std::result::Result<T, Error>;
