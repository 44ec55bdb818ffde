use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the sampling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("matrix is not symmetric (|A[{row},{col}] - A[{col},{row}]| = {diff:e})")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("matrix of size {n} exceeds the dense oracle cap {cap}")]
    OracleCapExceeded { n: usize, cap: usize },

    #[error("invalid sparse matrix: {0}")]
    InvalidSparse(String),

    #[error("degenerate simplex {index} (measure {measure:e})")]
    DegenerateSimplex { index: usize, measure: f64 },

    #[error("surface is not closed: {face:?} is shared by {count} simplices")]
    NonClosedSurface { face: Vec<usize>, count: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("refinement is only supported for unit circle and unit sphere meshes")]
    UnsupportedRefinement,

    #[error("closest point is undefined at the origin")]
    DegeneratePoint,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("spectral density '{label}' is not finite at node {node} (lambda = {lambda})")]
    Evaluation {
        label: String,
        node: usize,
        lambda: f64,
    },

    #[error("invalid Chebyshev interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("Chebyshev interval [{poly_lo}, {poly_hi}] does not contain the spectral interval [{op_lo}, {op_hi}]")]
    IntervalTooSmall {
        poly_lo: f64,
        poly_hi: f64,
        op_lo: f64,
        op_hi: f64,
    },

    #[error("mesh size must lie in (0, 1), got {0}")]
    InvalidMeshSize(f64),

    #[error("at least {needed} points are required, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
