use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("spectral cutoff must be at least 1")]
    EmptyBasis,

    #[error("basis index {index} out of range for basis of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("point ({0}, {1}) lies outside the domain")]
    PointOutsideDomain(f64, f64),

    #[error("fields live on different bases")]
    BasisMismatch,

    #[error("coefficient vector has length {got}, basis has {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite coefficients in {0}")]
    NonFinite(&'static str),

    #[error("unknown mode {0}")]
    UnknownMode(String),

    #[error("empty generator set")]
    EmptyGenerators,

    #[error("generator {0} is linearly dependent on the previous ones")]
    DependentGenerator(usize),

    #[error("oblique projection is degenerate (condition estimate {0:.3e})")]
    DegenerateSum(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no M up to {max} satisfies the tail bounds; cutoff too small")]
    CutoffTooSmall { max: usize },

    #[error("saturation does not cover the first {m} eigenfields")]
    SaturationNeeded { m: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state blew up at t = {time:.6} (|y|_H = {norm:.3e} > {bound:.3e})")]
    BlowUp { time: f64, norm: f64, bound: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}
