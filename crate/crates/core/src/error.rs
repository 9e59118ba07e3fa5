use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid function has {got} values but the grid has {expected} points")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("too few grid points: need at least {required}, got {got}")]
    TooFewPoints { required: usize, got: usize },

    #[error("interval [{a}, {b}] is not contained in [{t_min}, {t_max}]")]
    OutOfRange { a: f64, b: f64, t_min: f64, t_max: f64 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("point t = {t} is closer than {margin} to the band boundary")]
    BoundaryProximity { t: f64, margin: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("t = {t} lies outside the domain ({lo}, {hi})")]
    Domain { t: f64, lo: f64, hi: f64 },

    #[error("invalid perturbation profile: {0}")]
    InvalidAlpha(String),

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("pole proximity: {0}")]
    PoleProximity(String),

    #[error("weight function must be positive on the interior, found {value} at t = {t}")]
    NonPositiveWeight { t: f64, value: f64 },

    #[error("weight function must vanish at the boundary, found {value} at t = {t}")]
    BoundaryNonzero { t: f64, value: f64 },

    #[error("invalid bubble problem: {0}")]
    InvalidProblem(String),

    #[error("no critical slice: first variation is {} on the whole band", if *.sign > 0.0 { "positive" } else { "negative" })]
    NoCriticalPoint { sign: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("malformed CSV {path}: {message}")]
    MalformedCsv { path: PathBuf, message: String },

    #[error("non-positive warp in {path} at row {row}: {value}")]
    NonPositiveWarp { path: PathBuf, row: usize, value: f64 },

    #[error("t is not strictly increasing in {path} at row {row}")]
    NonMonotone { path: PathBuf, row: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
