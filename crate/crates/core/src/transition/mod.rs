//! Transition hypermatrices for the m-way walk.
//!
//! Slices are produced by a backward recurrence on `H⁺ = |H|`. Starting from
//! `ω = e`, each step computes
//!
//! ```text
//! η_i = Σ_j ω_j |H_ij|          P_ij = ω_j |H_ij| / η_i          ω ← η
//! ```
//!
//! The first slice produced is the one used *last* in each period of the
//! walk, so after `m` steps the slice built first is `P^(m)` and the one built
//! last is `P^(1)`. Because the recurrence only composes on the left, going
//! from `m` to `m + 1` slices is a single extra step that leaves the existing
//! slices untouched; [`HypermatrixBuilder`] exploits that.
//!
//! After `m` steps `η = (H⁺)^m e`, and the infinity norm of the squared-weight
//! operator `H̃` equals `max_i η_i²`. That quantity decides whether the walk's
//! variance is guaranteed finite, and it is available without forming `H̃`.

mod dump;

pub use dump::{read_hypermatrix, write_hypermatrix, DUMP_MAGIC, DUMP_VERSION};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Default cap on the number of slices tried by [`build_until_contractive`].
pub const DEFAULT_PHI_MAX: usize = 64;

/// Rows whose η falls below this are treated like empty rows.
pub const STARVATION_THRESHOLD: f64 = 1e-300;

/// `m` row-stochastic slices sharing `H`'s sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionHypermatrix {
    /// Build order: `built[0]` is `P^(m)`, `built[m-1]` is `P^(1)`.
    built: Vec<SparseMatrix>,
    /// `etas[k]` is the η produced together with `built[k]`.
    etas: Vec<Vec<f64>>,
}

impl TransitionHypermatrix {
    /// Adopts slices given in walk order `P^(1) … P^(m)` with their η vectors
    /// (same order). Checks row-stochasticity and positivity.
    pub fn from_walk_order(slices: Vec<SparseMatrix>, etas: Vec<Vec<f64>>) -> Result<Self> {
        if slices.is_empty() || slices.len() != etas.len() {
            return Err(Error::InvalidParameter {
                name: "slices",
                reason: format!("{} slices with {} eta vectors", slices.len(), etas.len()),
            });
        }
        for (s, p) in slices.iter().enumerate() {
            validate_slice(p, s + 1)?;
            if !p.same_pattern(&slices[0]) {
                return Err(Error::InvalidParameter {
                    name: "slices",
                    reason: format!("slice {} does not share the pattern of slice 1", s + 1),
                });
            }
        }
        let mut built = slices;
        built.reverse();
        let mut etas = etas;
        etas.reverse();
        Ok(Self { built, etas })
    }

    /// Number of slices.
    pub fn m(&self) -> usize {
        self.built.len()
    }

    pub fn dim(&self) -> usize {
        self.built[0].n_rows()
    }

    /// `P^(l)` for `l` in `1..=m`.
    pub fn slice(&self, l: usize) -> &SparseMatrix {
        assert!((1..=self.m()).contains(&l), "slice index {l} outside 1..={}", self.m());
        &self.built[self.m() - l]
    }

    /// Slices in walk order `P^(1) … P^(m)`.
    pub fn slices(&self) -> impl DoubleEndedIterator<Item = &SparseMatrix> + ExactSizeIterator {
        self.built.iter().rev()
    }

    /// Slices in the order the recurrence produced them, `P^(m)` first.
    pub fn slices_in_build_order(&self) -> &[SparseMatrix] {
        &self.built
    }

    /// `η^(l)` for `l` in `1..=m`, so that `η^(1) = (H⁺)^m e`.
    pub fn eta(&self, l: usize) -> &[f64] {
        assert!((1..=self.m()).contains(&l), "eta index {l} outside 1..={}", self.m());
        &self.etas[self.m() - l]
    }

    /// `max_i (η^(1)_i)²`, i.e. `‖H̃‖∞` for this hypermatrix.
    pub fn h_tilde_norm(&self) -> f64 {
        let top = self.eta(1).iter().fold(0.0f64, |a, &v| a.max(v));
        top * top
    }
}

/// Result of growing the hypermatrix until `‖H̃‖∞ < 1` or the cap is hit.
#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub hypermatrix: TransitionHypermatrix,
    pub h_tilde_norm: f64,
    /// True iff every `η^(1)_i < 1`.
    pub converged: bool,
    pub m_used: usize,
    pub phi_max_hit: bool,
}

/// Incremental form of the slice recurrence.
#[derive(Debug, Clone)]
pub struct HypermatrixBuilder {
    abs: SparseMatrix,
    omega: Vec<f64>,
    built: Vec<SparseMatrix>,
    etas: Vec<Vec<f64>>,
}

impl HypermatrixBuilder {
    pub fn new(h: &SparseMatrix) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::NotSquare { rows: h.n_rows(), cols: h.n_cols() });
        }
        if let Some(row) = h.first_empty_row() {
            return Err(Error::ZeroRow { row });
        }
        Ok(Self {
            abs: h.abs(),
            omega: vec![1.0; h.n_rows()],
            built: Vec::new(),
            etas: Vec::new(),
        })
    }

    pub fn m(&self) -> usize {
        self.built.len()
    }

    /// Latest η, equal to `(H⁺)^m e`. Empty before the first extension.
    pub fn current_eta(&self) -> &[f64] {
        self.etas.last().map_or(&[], Vec::as_slice)
    }

    /// `max_i η_i²` for the slices built so far.
    pub fn h_tilde_norm(&self) -> f64 {
        let top = self.current_eta().iter().fold(0.0f64, |a, &v| a.max(v));
        top * top
    }

    /// Adds one slice, which becomes the new `P^(1)`.
    pub fn extend(&mut self) -> Result<()> {
        let slice_number = self.built.len() + 1;
        let abs = &self.abs;
        let omega = &self.omega;
        let eta: Vec<f64> = abs.matvec(omega)?;
        if let Some((row, &value)) = eta.iter().enumerate().find(|(_, &v)| !(v >= STARVATION_THRESHOLD)) {
            return Err(Error::StarvingRow { row, slice: slice_number, eta: value });
        }

        // P_ij = ω_j |H_ij| / η_i, then renormalized by the computed row sum.
        let mut values = Vec::with_capacity(abs.nnz());
        for (i, &eta_i) in eta.iter().enumerate() {
            let (cols, vals) = abs.row(i);
            let start = values.len();
            values.extend(cols.iter().zip(vals).map(|(&j, &a)| omega[j] * a / eta_i));
            let row = &mut values[start..];
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
            if let Some(k) = row.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::StarvingRow { row: i, slice: slice_number, eta: omega[cols[k]] });
            }
        }
        let slice = SparseMatrix::from_csr(
            abs.n_rows(),
            abs.n_cols(),
            abs.row_ptr().to_vec(),
            abs.col_indices().to_vec(),
            values,
        )?;
        self.built.push(slice);
        self.omega.clone_from(&eta);
        self.etas.push(eta);
        Ok(())
    }

    /// Snapshot of the hypermatrix with the slices built so far.
    pub fn hypermatrix(&self) -> TransitionHypermatrix {
        assert!(!self.built.is_empty(), "no slice built yet");
        TransitionHypermatrix { built: self.built.clone(), etas: self.etas.clone() }
    }

    pub fn into_hypermatrix(self) -> TransitionHypermatrix {
        assert!(!self.built.is_empty(), "no slice built yet");
        TransitionHypermatrix { built: self.built, etas: self.etas }
    }
}

/// Runs the recurrence exactly `m` times.
///
/// ```
/// use multiway_mc::{SparseMatrix, transition::build_hypermatrix};
/// let h = SparseMatrix::from_dense(&[vec![0.2, 0.3], vec![0.4, 0.1]]).unwrap();
/// let p = build_hypermatrix(&h, 1).unwrap();
/// assert!((p.slice(1).get(0, 1) - 0.6).abs() < 1e-15);
/// assert!((p.h_tilde_norm() - 0.25).abs() < 1e-15);
/// ```
pub fn build_hypermatrix(h: &SparseMatrix, m: usize) -> Result<TransitionHypermatrix> {
    if m == 0 {
        return Err(Error::InvalidParameter { name: "m", reason: "at least one slice is required".into() });
    }
    let mut builder = HypermatrixBuilder::new(h)?;
    for _ in 0..m {
        builder.extend()?;
    }
    Ok(builder.into_hypermatrix())
}

/// Adds slices until every `η_i < 1` or `phi_max` slices exist.
pub fn build_until_contractive(h: &SparseMatrix, phi_max: usize) -> Result<BuildOutcome> {
    if phi_max == 0 {
        return Err(Error::InvalidParameter { name: "phi_max", reason: "must be at least 1".into() });
    }
    let mut builder = HypermatrixBuilder::new(h)?;
    loop {
        builder.extend()?;
        let converged = builder.current_eta().iter().all(|&v| v < 1.0);
        if converged || builder.m() == phi_max {
            let h_tilde_norm = builder.h_tilde_norm();
            let m_used = builder.m();
            return Ok(BuildOutcome {
                hypermatrix: builder.into_hypermatrix(),
                h_tilde_norm,
                converged,
                m_used,
                phi_max_hit: !converged,
            });
        }
    }
}

/// Initial distribution of the walk.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDistribution {
    p: Vec<f64>,
}

impl InitialDistribution {
    /// Validates a user-supplied distribution.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "p", reason: "entries must be finite and nonnegative".into() });
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter { name: "p", reason: format!("sums to {total}, not 1") });
        }
        Ok(Self { p })
    }

    /// `p_i = |h_i| / Σ_j |h_j|`.
    pub fn from_functional(h: &[f64]) -> Result<Self> {
        let total: f64 = h.iter().map(|v| v.abs()).sum();
        if total == 0.0 {
            return Err(Error::ZeroFunctional);
        }
        Ok(Self { p: h.iter().map(|v| v.abs() / total).collect() })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// Fails when some `h_i ≠ 0` has `p_i = 0`.
    pub fn check_covers(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.p.len() {
            return Err(Error::DimensionMismatch { expected: self.p.len(), actual: h.len() });
        }
        match h.iter().zip(&self.p).position(|(&hi, &pi)| hi != 0.0 && pi == 0.0) {
            Some(index) => Err(Error::SupportMismatch { index }),
            None => Ok(()),
        }
    }
}

fn validate_slice(p: &SparseMatrix, slice: usize) -> Result<()> {
    for i in 0..p.n_rows() {
        let (cols, vals) = p.row(i);
        if let Some(k) = vals.iter().position(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::InvalidTransition { slice, row: i, col: cols[k], reason: "probability outside (0,1]" });
        }
        let sum: f64 = vals.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            let col = cols.first().copied().unwrap_or(0);
            return Err(Error::InvalidTransition { slice, row: i, col, reason: "row does not sum to 1" });
        }
    }
    Ok(())
}

/// Checks that `p` covers exactly the nonzeros of `h`.
pub(crate) fn check_pattern(h: &SparseMatrix, p: &TransitionHypermatrix) -> Result<()> {
    for (s, slice) in p.slices().enumerate() {
        if !slice.same_pattern(h) {
            let row = (0..h.n_rows()).find(|&i| slice.row(i).0 != h.row(i).0).unwrap_or(0);
            let col = h.row(row).0.first().copied().unwrap_or(0);
            return Err(Error::InvalidTransition { slice: s + 1, row, col, reason: "slice pattern differs from H" });
        }
    }
    Ok(())
}
