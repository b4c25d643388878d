use super::SparseMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_EIG_TOL: f64 = 1e-10;
pub const DEFAULT_EIG_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub radius: f64,
    pub iterations: usize,
}

/// Power iteration for the Perron root of a nonnegative matrix.
///
/// Starts from the all-ones vector and iterates with the shifted operator
/// `M + αI`, `α` being half the running estimate. The shift keeps the Perron
/// root strictly dominant when `M` is cyclic (for instance the Jacobi matrix of
/// a grid Laplacian, whose spectrum is symmetric about zero) without changing
/// the eigenvector. The returned value is the Rayleigh quotient `xᵀMx / xᵀx`
/// at the last iterate; iteration stops once two consecutive quotients differ
/// by less than `tol`.
pub fn spectral_radius_nonneg(m: &SparseMatrix, tol: f64, max_iters: usize) -> Result<SpectralEstimate> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.n_rows(), cols: m.n_cols() });
    }
    if !m.is_nonnegative() {
        return Err(Error::InvalidParameter {
            name: "matrix",
            reason: "power iteration expects a nonnegative matrix; pass M.abs()".into(),
        });
    }
    let n = m.n_rows();
    if n == 0 || m.nnz() == 0 {
        return Ok(SpectralEstimate { radius: 0.0, iterations: 0 });
    }

    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut previous = f64::NAN;
    let mut change = f64::INFINITY;
    for iter in 1..=max_iters {
        m.matvec_into(&x, &mut y)?;
        // x has unit 2-norm
        let rq: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        change = (rq - previous).abs();
        if change < tol {
            return Ok(SpectralEstimate { radius: rq, iterations: iter });
        }
        previous = rq;

        let shift = 0.5 * rq;
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += shift * xi;
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            // nilpotent pattern
            return Ok(SpectralEstimate { radius: 0.0, iterations: iter });
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    Err(Error::EigenNoConvergence { iterations: max_iters, last_change: change })
}
