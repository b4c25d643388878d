use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong between loading a matrix and reporting an
/// estimate. Variants carry the row/slice coordinates needed to locate the
/// offending data.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("row {row} of H is entirely zero")]
    ZeroRow { row: usize },

    #[error("column {col} of H is entirely zero")]
    ZeroColumn { col: usize },

    #[error("row {row} starves the transition builder: eta = {eta:e} at slice {slice}")]
    StarvingRow { row: usize, slice: usize, eta: f64 },

    #[error("zero diagonal entry at row {row}; diagonal preconditioning is undefined")]
    ZeroDiagonal { row: usize },

    #[error("the functional vector h is identically zero")]
    ZeroFunctional,

    #[error("p_{index} = 0 but h_{index} != 0; the initial distribution does not cover h")]
    SupportMismatch { index: usize },

    #[error("invalid hypermatrix: slice {slice}, entry ({row},{col}): {reason}")]
    InvalidTransition {
        slice: usize,
        row: usize,
        col: usize,
        reason: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("power iteration did not converge in {iterations} iterations (last change {last_change:e})")]
    EigenNoConvergence { iterations: usize, last_change: f64 },

    #[error("Neumann iteration diverged after {iterations} iterations (increment {increment:e})")]
    Diverged { iterations: usize, increment: f64 },

    #[error("Neumann iteration did not reach tolerance in {iterations} iterations (increment {increment:e})")]
    NoConvergence { iterations: usize, increment: f64 },

    #[error("closed-form variance of the {side} walk did not converge")]
    VarianceDiverged { side: &'static str },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported Matrix Market file: {0}")]
    Unsupported(String),

    #[error("hypermatrix dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
