//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index ({row}, {col}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("observation set is empty")]
    EmptyObservations,

    #[error("duplicate observation at ({row}, {col})")]
    DuplicateObservation { row: usize, col: usize },

    #[error("invalid quality score {value}: must be finite and nonnegative")]
    InvalidQuality { value: f64 },

    #[error(
        "weight {weight} at entry ({row}, {col}) with quality {quality} is not positive; \
         reduce the slope"
    )]
    NonPositiveWeight {
        row: usize,
        col: usize,
        quality: f64,
        weight: f64,
    },

    #[error("maximum weight {max_weight} deviates from 1 by more than {tol}")]
    WeightNotNormalized { max_weight: f64, tol: f64 },

    #[error("weight model and observation mask cover different entries")]
    WeightMaskMismatch,

    #[error("constraint radius must be nonnegative, got {0}")]
    NegativeDelta(f64),

    #[error("sampling rate must lie in (0, 1], got {0}")]
    InvalidSamplingRate(f64),

    #[error("read {row} covers no columns")]
    EmptyRead { row: usize },

    #[error("row clustering produced a single cluster; coverage is degenerate")]
    DegenerateClusters { centroid: Vec<f64> },

    #[error("haplotype entries must be +1 or -1")]
    NotPlusMinusOne,

    #[error("ground-truth matrix has zero Frobenius norm")]
    ZeroTruth,

    #[error("line {line}: {msg}")]
    FragmentParse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("SVD did not converge")]
    SvdFailed,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
