//! Compressed sparse row storage and the handful of kernels the solver needs.
//!
//! [`SparseMatrix`] keeps two structural invariants that the rest of the crate
//! leans on: no stored entry is exactly zero, and column indices inside each
//! row are strictly increasing. The transition builder relies on the first
//! (a stored entry is a transition the walk may take) and the sampler on the
//! second (cumulative sums are laid out in column order).

mod market;
mod spectral;
mod synth;

pub use market::{load_matrix_market, read_matrix_market, write_matrix_market};
pub use spectral::{spectral_radius_nonneg, SpectralEstimate, DEFAULT_EIG_MAX_ITERS, DEFAULT_EIG_TOL};
pub use synth::{diagonal_precondition, rescale_to_radius, sprand_like, sprand_without_empty_lines, SyntheticMatrix};

use crate::error::{Error, Result};

/// Real matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets in any order.
    ///
    /// Duplicate coordinates are summed, and entries that are (or sum to)
    /// exactly zero are dropped.
    pub fn from_triplets<I>(n_rows: usize, n_cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, _) in &entries {
            if i >= n_rows {
                return Err(Error::DimensionMismatch { expected: n_rows, actual: i + 1 });
            }
            if j >= n_cols {
                return Err(Error::DimensionMismatch { expected: n_cols, actual: j + 1 });
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));

        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut iter = entries.into_iter().peekable();
        while let Some((i, j, mut v)) = iter.next() {
            while let Some(&(ni, nj, nv)) = iter.peek() {
                if ni == i && nj == j {
                    v += nv;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != 0.0 {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values })
    }

    /// Builds a matrix from dense rows, skipping zeros.
    ///
    /// ```
    /// use multiway_mc::SparseMatrix;
    /// let m = SparseMatrix::from_dense(&[vec![0.2, 0.0], vec![0.4, 0.1]]).unwrap();
    /// assert_eq!(m.nnz(), 3);
    /// ```
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch { expected: n_cols, actual: row.len() });
            }
            triplets.extend(row.iter().enumerate().map(|(j, &v)| (i, j, v)));
        }
        Self::from_triplets(n_rows, n_cols, triplets)
    }

    /// Validates and adopts raw CSR arrays.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |reason: String| Error::InvalidParameter { name: "csr", reason };
        if row_ptr.len() != n_rows + 1 || row_ptr[0] != 0 {
            return Err(bad(format!("row_ptr must have {} entries starting at 0", n_rows + 1)));
        }
        if col_idx.len() != values.len() || row_ptr[n_rows] != values.len() {
            return Err(bad("row_ptr, col_idx and values disagree on nnz".into()));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            if lo > hi {
                return Err(bad(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad(format!("column indices of row {i} are not strictly increasing")));
            }
            if cols.last().is_some_and(|&c| c >= n_cols) {
                return Err(bad(format!("column index out of range in row {i}")));
            }
            if values[lo..hi].iter().any(|&v| v == 0.0 || !v.is_finite()) {
                return Err(bad(format!("row {i} stores a zero or non-finite value")));
            }
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    /// Square diagonal matrix; zero diagonal entries are not stored.
    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_triplets(n, n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
            .expect("diagonal coordinates are in range")
    }

    /// Same sparsity pattern, values produced by `f(row, col, value)`.
    ///
    /// `f` must not return zero; the pattern would then store an explicit zero.
    pub(crate) fn with_pattern_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                values.push(f(i, self.col_idx[k], self.values[k]));
            }
        }
        debug_assert!(values.iter().all(|&v| v != 0.0));
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Stored value at `(i, j)`, or zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// `M v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_rows];
        self.matvec_into(v, &mut out)?;
        Ok(out)
    }

    /// `out = M v` without allocating.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        if v.len() != self.n_cols {
            return Err(Error::DimensionMismatch { expected: self.n_cols, actual: v.len() });
        }
        if out.len() != self.n_rows {
            return Err(Error::DimensionMismatch { expected: self.n_rows, actual: out.len() });
        }
        for (i, o) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *o = cols.iter().zip(vals).map(|(&j, &a)| a * v[j]).sum();
        }
        Ok(())
    }

    /// Elementwise absolute value, written `H⁺` in the analysis.
    pub fn abs(&self) -> SparseMatrix {
        self.with_pattern_values(|_, _, v| v.abs())
    }

    /// `max_i Σ_j |M_ij|`.
    pub fn infinity_norm(&self) -> f64 {
        self.abs_row_sums().into_iter().fold(0.0, f64::max)
    }

    pub fn abs_row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().map(|v| v.abs()).sum()).collect()
    }

    /// Every entry multiplied by `factor` (must be nonzero).
    pub fn scaled(&self, factor: f64) -> SparseMatrix {
        assert!(factor != 0.0, "scaling by zero would store explicit zeros");
        self.with_pattern_values(|_, _, v| v * factor)
    }

    /// Index of the first row without stored entries.
    pub fn first_empty_row(&self) -> Option<usize> {
        (0..self.n_rows).find(|&i| self.row_ptr[i] == self.row_ptr[i + 1])
    }

    /// Index of the first column without stored entries.
    pub fn first_empty_column(&self) -> Option<usize> {
        let mut seen = vec![false; self.n_cols];
        for &j in &self.col_idx {
            seen[j] = true;
        }
        seen.iter().position(|&s| !s)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in dense.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        dense
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m2() -> SparseMatrix {
        SparseMatrix::from_dense(&[vec![0.2, 0.3], vec![0.4, 0.1]]).unwrap()
    }

    #[test]
    fn matvec_examples() {
        assert_eq!(m2().matvec(&[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(SparseMatrix::identity(3).matvec(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let swap = SparseMatrix::from_dense(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        assert_eq!(swap.matvec(&[2.0, 4.0]).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn matvec_rejects_wrong_length() {
        assert!(matches!(
            m2().matvec(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn abs_examples() {
        let m = SparseMatrix::from_dense(&[vec![-0.2, 0.3], vec![0.4, -0.1]]).unwrap();
        assert_eq!(m.abs().to_dense(), vec![vec![0.2, 0.3], vec![0.4, 0.1]]);
        assert_eq!(m2().abs(), m2());
        let anti = SparseMatrix::from_dense(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(anti.abs().to_dense(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(anti.abs().same_pattern(&anti));
    }

    #[test]
    fn infinity_norm_examples() {
        assert_relative_eq!(m2().infinity_norm(), 0.5);
        assert_eq!(SparseMatrix::from_triplets(3, 3, []).unwrap().infinity_norm(), 0.0);
        assert_eq!(SparseMatrix::identity(5).infinity_norm(), 1.0);
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            [(1, 2, 1.0), (0, 1, 2.0), (1, 2, -1.0), (0, 0, 0.0), (0, 1, 0.5)],
        )
        .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 2.5);
        assert_eq!(m.get(1, 2), 0.0);
        assert_eq!(m.first_empty_row(), Some(1));
        assert_eq!(m.first_empty_column(), Some(0));
    }

    #[test]
    fn from_csr_rejects_unsorted_columns() {
        let err = SparseMatrix::from_csr(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(err.is_err());
        let err = SparseMatrix::from_csr(1, 3, vec![0, 1], vec![1], vec![0.0]);
        assert!(err.is_err());
        let ok = SparseMatrix::from_csr(1, 3, vec![0, 2], vec![0, 2], vec![1.0, -1.0]).unwrap();
        assert_eq!(ok.get(0, 2), -1.0);
    }
}
