use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// A system `x = Hx + b` together with the functional `h` whose value
/// `⟨h, x⟩` is being estimated.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    matrix: SparseMatrix,
    b: Vec<f64>,
    h: Vec<f64>,
}

impl ProblemInstance {
    /// Validates dimensions and the standing assumptions: `H` square with no
    /// empty row or column, `h` not identically zero.
    pub fn new(matrix: SparseMatrix, b: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare { rows: matrix.n_rows(), cols: matrix.n_cols() });
        }
        let n = matrix.n_rows();
        for v in [&b, &h] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: v.len() });
            }
        }
        if let Some(row) = matrix.first_empty_row() {
            return Err(Error::ZeroRow { row });
        }
        if let Some(col) = matrix.first_empty_column() {
            return Err(Error::ZeroColumn { col });
        }
        if h.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroFunctional);
        }
        if b.iter().chain(&h).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "b/h", reason: "non-finite entry".into() });
        }
        Ok(Self { matrix, b, h })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// True when `H`, `b` and `h` carry no negative entries, the regime in
    /// which the closed-form variance holds without extra conditions.
    pub fn is_nonnegative(&self) -> bool {
        self.matrix.is_nonnegative() && self.b.iter().chain(&self.h).all(|&v| v >= 0.0)
    }

    /// Same system with a different functional.
    pub fn with_functional(&self, h: Vec<f64>) -> Result<Self> {
        Self::new(self.matrix.clone(), self.b.clone(), h)
    }
}
