use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice geometry {rows}x{cols}: need rows >= 1 and cols >= 3")]
    InvalidGeometry { rows: usize, cols: usize },

    #[error("index {index} out of range for a lattice of {len} cells")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("spin value {0} is not -1 or +1")]
    InvalidSpin(i64),

    #[error("expected {expected} spins, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("geometry mismatch: {left} vs {right}")]
    GeometryMismatch { left: String, right: String },

    #[error("duplicate seed index {0}")]
    DuplicateSeedIndex(usize),

    #[error("index {0} is pinned by the seed and cannot be flipped")]
    SeededIndex(usize),

    #[error("every site is pinned by the seed; the chain has no free index to propose")]
    NoFreeSites,

    #[error("rotation range {max_shift} must be smaller than the column count {cols}")]
    RotationRange { max_shift: usize, cols: usize },

    #[error("invalid recording schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid seed specification: {0}")]
    InvalidSeedSpec(String),

    #[error("seed size {requested} exceeds the {available} lattice cells")]
    SeedTooLarge { requested: usize, available: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("sample variance is zero; degrees of freedom are undefined")]
    ZeroVariance,

    #[error("sample mean {0} lies outside (0, 1)")]
    MeanOutOfRange(f64),

    #[error("invalid fraction: {0}")]
    InvalidFraction(String),

    #[error("{free} free bits exceed the enumeration bound of {max}")]
    TooManyFreeBits { free: usize, max: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("refusing to overwrite existing file {0}")]
    WouldOverwrite(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
