use rand::distr::Open01;
use rand::Rng;

use super::spectral::{spectral_radius_nonneg, DEFAULT_EIG_MAX_ITERS, DEFAULT_EIG_TOL};
use super::SparseMatrix;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

const MAX_REGENERATIONS: usize = 10_000;

/// Random `n×n` matrix: every position is kept independently with
/// probability `density`, kept values are uniform on the open interval (0,1).
///
/// ```
/// let a = multiway_mc::sparse::sprand_like(50, 0.3, 9).unwrap();
/// let b = multiway_mc::sparse::sprand_like(50, 0.3, 9).unwrap();
/// assert_eq!(a, b);
/// ```
pub fn sprand_like(n: usize, density: f64, seed: u64) -> Result<SparseMatrix> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "density",
            reason: format!("{density} is outside (0, 1]"),
        });
    }
    let mut rng = stream_rng(seed, 0);
    let mut row_ptr = Vec::with_capacity(n + 1);
    let expected = (density * (n * n) as f64 * 1.1) as usize;
    let mut col_idx = Vec::with_capacity(expected);
    let mut values = Vec::with_capacity(expected);
    row_ptr.push(0);
    for _ in 0..n {
        for j in 0..n {
            if rng.random::<f64>() < density {
                col_idx.push(j);
                values.push(rng.sample::<f64, _>(Open01));
            }
        }
        row_ptr.push(col_idx.len());
    }
    Ok(SparseMatrix { n_rows: n, n_cols: n, row_ptr, col_idx, values })
}

#[derive(Debug, Clone)]
pub struct SyntheticMatrix {
    pub matrix: SparseMatrix,
    /// Seed that produced `matrix`.
    pub seed: u64,
    /// Number of rejected draws that had an empty row or column.
    pub retries: usize,
}

/// [`sprand_like`], redrawn with derived seeds until no row and no column is
/// empty.
pub fn sprand_without_empty_lines(n: usize, density: f64, seed: u64) -> Result<SyntheticMatrix> {
    for retries in 0..MAX_REGENERATIONS {
        let attempt_seed = if retries == 0 { seed } else { derive_seed(seed, retries as u64) };
        let matrix = sprand_like(n, density, attempt_seed)?;
        if matrix.first_empty_row().is_none() && matrix.first_empty_column().is_none() {
            return Ok(SyntheticMatrix { matrix, seed: attempt_seed, retries });
        }
    }
    Err(Error::InvalidParameter {
        name: "density",
        reason: format!("{MAX_REGENERATIONS} draws at density {density} all had an empty row or column"),
    })
}

/// `r·M/ρ(M)` for nonnegative `M`.
///
/// `r` is normally in (0,1); larger targets are accepted so divergent
/// instances can be produced on purpose.
pub fn rescale_to_radius(m: &SparseMatrix, r: f64) -> Result<SparseMatrix> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter { name: "radius", reason: format!("{r} must be positive") });
    }
    let current = spectral_radius_nonneg(m, DEFAULT_EIG_TOL, DEFAULT_EIG_MAX_ITERS)?.radius;
    if current <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "matrix",
            reason: "spectral radius is zero; cannot rescale a nilpotent pattern".into(),
        });
    }
    Ok(m.scaled(r / current))
}

/// `H = I − Diag(A)⁻¹A`. The diagonal of `H` is structurally absent.
pub fn diagonal_precondition(a: &SparseMatrix) -> Result<SparseMatrix> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.n_rows(), cols: a.n_cols() });
    }
    let n = a.n_rows();
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in 0..n {
        let d = a.get(i, i);
        if d == 0.0 {
            return Err(Error::ZeroDiagonal { row: i });
        }
        let (cols, vals) = a.row(i);
        triplets.extend(cols.iter().zip(vals).filter(|(&j, _)| j != i).map(|(&j, &v)| (i, j, -v / d)));
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sprand_density_matches_binomial_model() {
        let m = sprand_like(1000, 0.2, 42).unwrap();
        let mean = 200_000.0;
        let sigma = (1_000_000.0f64 * 0.2 * 0.8).sqrt();
        assert!((m.nnz() as f64 - mean).abs() <= 3.0 * sigma, "nnz = {}", m.nnz());
        assert!(m.values().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn sprand_full_density_and_determinism() {
        let m = sprand_like(30, 1.0, 1).unwrap();
        assert_eq!(m.nnz(), 900);
        assert_eq!(sprand_like(40, 0.1, 5).unwrap(), sprand_like(40, 0.1, 5).unwrap());
        assert_ne!(sprand_like(40, 0.1, 5).unwrap(), sprand_like(40, 0.1, 6).unwrap());
        assert!(sprand_like(10, 0.0, 1).is_err());
        assert!(sprand_like(10, 1.5, 1).is_err());
    }

    #[test]
    fn regeneration_removes_empty_lines() {
        let s = sprand_without_empty_lines(20, 0.08, 3).unwrap();
        assert!(s.matrix.first_empty_row().is_none());
        assert!(s.matrix.first_empty_column().is_none());
        let again = sprand_without_empty_lines(20, 0.08, 3).unwrap();
        assert_eq!(s.retries, again.retries);
        assert_eq!(s.matrix, again.matrix);
    }

    #[test]
    fn rescale_examples() {
        let swap = SparseMatrix::from_dense(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let r = rescale_to_radius(&swap, 0.9).unwrap();
        for (a, b) in r.values().iter().zip(swap.values()) {
            assert_relative_eq!(*a, b * 1.8, max_relative = 1e-9);
        }
        let same = rescale_to_radius(&swap, 0.5).unwrap();
        for (a, b) in same.values().iter().zip(swap.values()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-9);
        }
        let d = rescale_to_radius(&SparseMatrix::diagonal(&[0.2, 0.4]), 0.8).unwrap();
        assert_relative_eq!(d.get(0, 0), 0.4, max_relative = 1e-8);
        assert_relative_eq!(d.get(1, 1), 0.8, max_relative = 1e-8);
    }

    #[test]
    fn precondition_examples() {
        let h = diagonal_precondition(&SparseMatrix::diagonal(&[2.0, 4.0])).unwrap();
        assert_eq!(h.nnz(), 0);
        assert_eq!(diagonal_precondition(&SparseMatrix::identity(4)).unwrap().nnz(), 0);
        let a = SparseMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let h = diagonal_precondition(&a).unwrap();
        assert_eq!(h.to_dense(), vec![vec![0.0, -0.5], vec![-0.5, 0.0]]);
        assert_eq!(h.nnz(), 2);
    }

    #[test]
    fn precondition_names_zero_diagonal_row() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 3.0]]).unwrap();
        assert!(matches!(diagonal_precondition(&a), Err(Error::ZeroDiagonal { row: 1 })));
    }
}
