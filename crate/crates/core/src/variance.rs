//! Closed-form variance of the walk estimator.
//!
//! With `ĥ_i = h_i²/p_i` and `Ĥ^(ℓ)_ij = H_ij²/P^(ℓ)_ij` on the pattern of `H`,
//!
//! ```text
//! H̃ = Ĥ^(1)Ĥ^(2)⋯Ĥ^(m)        G = I + Ĥ^(1) + Ĥ^(1)Ĥ^(2) + ⋯ + Ĥ^(1)⋯Ĥ^(m−1)
//! Var[Z] = ⟨ĥ, Σ_i H̃^i G Diag(b)(2Hx + b)⟩ − ⟨h, x⟩²
//! ```
//!
//! The series converges iff `ρ(H̃) < 1`. `H̃` and `G` are only ever applied
//! slice by slice; their explicit products fill in even when `H` is sparse.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::sparse::{dot, norm_inf, SparseMatrix};
use crate::transition::{build_hypermatrix, check_pattern, HypermatrixBuilder, InitialDistribution, TransitionHypermatrix};

/// Tolerance used for `x` inside variance computations.
pub const SOLVE_TOL: f64 = 1e-12;
pub const SOLVE_MAX_ITERS: usize = 1_000_000;
/// Default relative tolerance of the `Σ H̃^i` evaluation.
pub const NEUMANN_TOL: f64 = 1e-10;
pub const NEUMANN_MAX_ITERS: usize = 200_000;
/// Systems up to this size are solved densely in [`solve_x`].
pub const DENSE_SOLVE_LIMIT: usize = 512;
/// Hat entries above this make the variance numerically fragile.
pub const LARGE_ENTRY_WARNING: f64 = 1e12;

const RICHARDSON_GROWTH_LIMIT: usize = 10;
const NEUMANN_GROWTH_LIMIT: usize = 20;

/// `ĥ` and the slices `Ĥ^(1) … Ĥ^(m)`.
#[derive(Debug, Clone)]
pub struct HatOperators {
    pub h_hat: Vec<f64>,
    /// Walk order.
    pub hat_slices: Vec<SparseMatrix>,
}

impl HatOperators {
    pub fn m(&self) -> usize {
        self.hat_slices.len()
    }

    pub fn dim(&self) -> usize {
        self.h_hat.len()
    }

    /// Largest entry of `ĥ` or any `Ĥ^(ℓ)`.
    pub fn max_entry(&self) -> f64 {
        self.hat_slices
            .iter()
            .flat_map(|s| s.values().iter())
            .chain(&self.h_hat)
            .fold(0.0f64, |a, &v| a.max(v))
    }
}

pub fn build_hat_operators(
    problem: &ProblemInstance,
    p: &TransitionHypermatrix,
    init: &InitialDistribution,
) -> Result<HatOperators> {
    let h = problem.matrix();
    check_pattern(h, p)?;
    init.check_covers(problem.h())?;
    let h_hat = problem
        .h()
        .iter()
        .zip(init.probabilities())
        .map(|(&hi, &pi)| if hi == 0.0 { 0.0 } else { hi * hi / pi })
        .collect();
    let mut hat_slices = Vec::with_capacity(p.m());
    for (s, slice) in p.slices().enumerate() {
        let probs = slice.values();
        if let Some(k) = probs.iter().position(|&q| !(q > 0.0)) {
            let row = h.row_ptr().partition_point(|&start| start <= k) - 1;
            return Err(Error::InvalidTransition {
                slice: s + 1,
                row,
                col: h.col_indices()[k],
                reason: "zero probability on a nonzero of H",
            });
        }
        let mut k = 0;
        hat_slices.push(h.with_pattern_values(|_, _, v| {
            let value = v * v / probs[k];
            k += 1;
            value
        }));
    }
    Ok(HatOperators { h_hat, hat_slices })
}

/// `H̃ v = Ĥ^(1)(Ĥ^(2)(⋯Ĥ^(m) v))`.
pub fn apply_h_tilde(ops: &HatOperators, v: &[f64]) -> Result<Vec<f64>> {
    check_len(ops, v)?;
    let mut current = v.to_vec();
    let mut next = vec![0.0; v.len()];
    for slice in ops.hat_slices.iter().rev() {
        slice.matvec_into(&current, &mut next)?;
        std::mem::swap(&mut current, &mut next);
    }
    Ok(current)
}

/// `G v = v + Ĥ^(1)v + Ĥ^(1)Ĥ^(2)v + ⋯`, evaluated Horner-style with `m − 1`
/// slice applications.
pub fn apply_g(ops: &HatOperators, v: &[f64]) -> Result<Vec<f64>> {
    check_len(ops, v)?;
    let mut acc = v.to_vec();
    let mut scratch = vec![0.0; v.len()];
    for slice in ops.hat_slices[..ops.m() - 1].iter().rev() {
        slice.matvec_into(&acc, &mut scratch)?;
        for ((a, s), vi) in acc.iter_mut().zip(&scratch).zip(v) {
            *a = vi + s;
        }
    }
    Ok(acc)
}

fn check_len(ops: &HatOperators, v: &[f64]) -> Result<()> {
    if v.len() != ops.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), actual: v.len() });
    }
    Ok(())
}

/// Solution of `x = Hx + b`.
///
/// Dense LU on `I − H` when `n ≤ 512`, Richardson iteration `x ← Hx + b`
/// otherwise, stopped once `‖x − (Hx + b)‖∞ ≤ tol·‖b‖∞`. A residual that grows
/// for ten consecutive iterations is reported as divergence.
pub fn solve_x(problem: &ProblemInstance, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    solve_fixed_point(problem.matrix(), problem.b(), tol, max_iters)
}

pub fn solve_fixed_point(h: &SparseMatrix, b: &[f64], tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    if !h.is_square() {
        return Err(Error::NotSquare { rows: h.n_rows(), cols: h.n_cols() });
    }
    let n = h.n_rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: b.len() });
    }
    let b_norm = norm_inf(b);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    if n <= DENSE_SOLVE_LIMIT {
        return solve_dense(h, b);
    }

    let mut x = b.to_vec();
    let mut next = vec![0.0; n];
    let mut previous = f64::INFINITY;
    let mut growing = 0;
    for iter in 1..=max_iters {
        h.matvec_into(&x, &mut next)?;
        let mut residual = 0.0f64;
        for ((nx, &bi), &xi) in next.iter_mut().zip(b).zip(&x) {
            *nx += bi;
            residual = residual.max((*nx - xi).abs());
        }
        std::mem::swap(&mut x, &mut next);
        if residual <= tol * b_norm {
            return Ok(x);
        }
        if !residual.is_finite() {
            return Err(Error::Diverged { iterations: iter, increment: residual });
        }
        growing = if residual > previous { growing + 1 } else { 0 };
        if growing >= RICHARDSON_GROWTH_LIMIT {
            return Err(Error::Diverged { iterations: iter, increment: residual });
        }
        previous = residual;
    }
    Err(Error::NoConvergence { iterations: max_iters, increment: previous })
}

fn solve_dense(h: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = h.n_rows();
    let mut a = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        let (cols, vals) = h.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            a[(i, j)] -= v;
        }
    }
    let x = a
        .lu()
        .solve(&DVector::from_column_slice(b))
        .ok_or_else(|| Error::InvalidParameter { name: "H", reason: "I − H is singular".into() })?;
    Ok(x.iter().copied().collect())
}

/// Which hypothesis the closed form was evaluated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceRegime {
    /// `H` and `b` nonnegative.
    Nonnegative,
    /// Signed data; valid because the series was seen to converge.
    SignedConvergent,
}

#[derive(Debug, Clone)]
pub struct VarianceReport {
    /// `Var[Z]`; NaN when the series did not converge.
    pub variance: f64,
    /// `⟨h, x⟩`.
    pub first_moment: f64,
    /// `⟨ĥ, Σ H̃^i G Diag(b)(2Hx + b)⟩`; NaN when the series did not converge.
    pub second_moment_term: f64,
    /// `‖H̃‖∞ = max_i (H̃e)_i`.
    pub h_tilde_norm: f64,
    pub neumann_iterations: usize,
    pub converged: bool,
    /// Last ratio of successive increment norms, an estimate of `ρ(H̃)`.
    pub growth_factor: f64,
    pub regime: VarianceRegime,
    /// Some hat entry exceeds [`LARGE_ENTRY_WARNING`].
    pub large_entries: bool,
}

/// Holds the solved system so several hypermatrices can be compared
/// against the same `x`.
#[derive(Debug)]
pub struct VarianceAnalyzer<'a> {
    problem: &'a ProblemInstance,
    x: Vec<f64>,
    /// `Diag(b)(2Hx + b)`.
    source: Vec<f64>,
}

impl<'a> VarianceAnalyzer<'a> {
    pub fn new(problem: &'a ProblemInstance) -> Result<Self> {
        let x = solve_x(problem, SOLVE_TOL, SOLVE_MAX_ITERS)?;
        Self::with_solution(problem, x)
    }

    pub fn with_solution(problem: &'a ProblemInstance, x: Vec<f64>) -> Result<Self> {
        if x.len() != problem.dim() {
            return Err(Error::DimensionMismatch { expected: problem.dim(), actual: x.len() });
        }
        let hx = problem.matrix().matvec(&x)?;
        let source = problem.b().iter().zip(&hx).map(|(&bi, &hxi)| bi * (2.0 * hxi + bi)).collect();
        Ok(Self { problem, x, source })
    }

    pub fn solution(&self) -> &[f64] {
        &self.x
    }

    pub fn first_moment(&self) -> f64 {
        dot(self.problem.h(), &self.x)
    }

    pub fn variance(&self, p: &TransitionHypermatrix, init: &InitialDistribution, tol: f64) -> Result<VarianceReport> {
        let ops = build_hat_operators(self.problem, p, init)?;
        self.variance_from_ops(&ops, tol, NEUMANN_MAX_ITERS)
    }

    pub fn variance_from_ops(&self, ops: &HatOperators, tol: f64, max_iters: usize) -> Result<VarianceReport> {
        let n = self.problem.dim();
        let first_moment = self.first_moment();
        let h_tilde_norm = norm_inf(&apply_h_tilde(ops, &vec![1.0; n])?);
        let regime = if self.problem.matrix().is_nonnegative() && self.problem.b().iter().all(|&v| v >= 0.0) {
            VarianceRegime::Nonnegative
        } else {
            VarianceRegime::SignedConvergent
        };
        let w = apply_g(ops, &self.source)?;
        let series = neumann_series(ops, &w, tol, max_iters)?;
        let (variance, second_moment_term) = match &series.sum {
            Some(s) => {
                let second = dot(&ops.h_hat, s);
                (second - first_moment * first_moment, second)
            }
            None => (f64::NAN, f64::NAN),
        };
        Ok(VarianceReport {
            variance,
            first_moment,
            second_moment_term,
            h_tilde_norm,
            neumann_iterations: series.iterations,
            converged: series.sum.is_some(),
            growth_factor: series.growth_factor,
            regime,
            large_entries: ops.max_entry() > LARGE_ENTRY_WARNING,
        })
    }
}

struct SeriesOutcome {
    sum: Option<Vec<f64>>,
    iterations: usize,
    growth_factor: f64,
}

/// `Σ_{i≥0} H̃^i w`, stopped when `‖H̃^i w‖∞ ≤ tol·‖w‖∞`.
fn neumann_series(ops: &HatOperators, w: &[f64], tol: f64, max_iters: usize) -> Result<SeriesOutcome> {
    let w_norm = norm_inf(w);
    let mut sum = w.to_vec();
    if w_norm == 0.0 {
        return Ok(SeriesOutcome { sum: Some(sum), iterations: 0, growth_factor: 0.0 });
    }
    let mut term = w.to_vec();
    let mut previous = w_norm;
    let mut growth_factor = 0.0;
    let mut growing = 0;
    for iter in 1..=max_iters {
        term = apply_h_tilde(ops, &term)?;
        let norm = norm_inf(&term);
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        growth_factor = norm / previous;
        if norm <= tol * w_norm {
            return Ok(SeriesOutcome { sum: Some(sum), iterations: iter, growth_factor });
        }
        growing = if norm > previous { growing + 1 } else { 0 };
        if growing >= NEUMANN_GROWTH_LIMIT || !norm.is_finite() {
            return Ok(SeriesOutcome { sum: None, iterations: iter, growth_factor });
        }
        previous = norm;
    }
    Ok(SeriesOutcome { sum: None, iterations: max_iters, growth_factor })
}

/// Closed-form `Var[Z]` for the walk `(p, P)`.
///
/// A report with `converged = false` means the series `Σ H̃^i` did not settle
/// within the iteration budget; its variance is NaN, never a partial sum.
pub fn closed_form_variance(
    problem: &ProblemInstance,
    p: &TransitionHypermatrix,
    init: &InitialDistribution,
    tol: f64,
) -> Result<VarianceReport> {
    VarianceAnalyzer::new(problem)?.variance(p, init, tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupResult {
    /// 1-way variance `Var[X]`.
    pub var_standard: f64,
    /// m-way variance `Var[Z]`.
    pub var_multiway: f64,
    /// `Var[X] / Var[Z]`.
    pub speedup: f64,
}

/// `Var[X]/Var[Z]` for the m-way walk against the standard walk, both with
/// `p_i ∝ |h_i|` and hypermatrices from the slice recurrence.
pub fn speedup_vs_standard(problem: &ProblemInstance, m: usize, tol: f64) -> Result<SpeedupResult> {
    let analyzer = VarianceAnalyzer::new(problem)?;
    let init = InitialDistribution::from_functional(problem.h())?;
    let standard = analyzer.variance(&build_hypermatrix(problem.matrix(), 1)?, &init, tol)?;
    let multi = analyzer.variance(&build_hypermatrix(problem.matrix(), m)?, &init, tol)?;
    speedup_from_reports(&standard, &multi)
}

/// Speed-ups for several `m` sharing one solve and one incremental build.
/// Entries follow `ms`; each is an error when its side diverged.
pub fn speedup_sweep(problem: &ProblemInstance, ms: &[usize], tol: f64) -> Result<Vec<Result<SpeedupResult>>> {
    let analyzer = VarianceAnalyzer::new(problem)?;
    let init = InitialDistribution::from_functional(problem.h())?;
    let top = ms.iter().copied().max().unwrap_or(1).max(1);
    let mut builder = HypermatrixBuilder::new(problem.matrix())?;
    let mut reports = Vec::with_capacity(top);
    for _ in 0..top {
        builder.extend()?;
        reports.push(analyzer.variance(&builder.hypermatrix(), &init, tol)?);
    }
    Ok(ms
        .iter()
        .map(|&m| {
            if m == 0 {
                return Err(Error::InvalidParameter { name: "m", reason: "at least one slice is required".into() });
            }
            speedup_from_reports(&reports[0], &reports[m - 1])
        })
        .collect())
}

fn speedup_from_reports(standard: &VarianceReport, multi: &VarianceReport) -> Result<SpeedupResult> {
    if !standard.converged {
        return Err(Error::VarianceDiverged { side: "standard 1-way" });
    }
    if !multi.converged {
        return Err(Error::VarianceDiverged { side: "multi-way" });
    }
    Ok(SpeedupResult {
        var_standard: standard.variance,
        var_multiway: multi.variance,
        speedup: standard.variance / multi.variance,
    })
}

/// One row of the partial-sum table produced by [`divergence_demo`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialSumRow {
    pub terms: usize,
    /// `‖H̃^k w‖∞`.
    pub term_norm: f64,
    /// `⟨ĥ, Σ_{i≤k} H̃^i w⟩ − ⟨h, x⟩²`.
    pub partial_variance: f64,
}

#[derive(Debug, Clone)]
pub struct DivergenceReport {
    pub rows: Vec<PartialSumRow>,
    /// Ratio of the last two term norms.
    pub growth_factor: f64,
    pub h_tilde_norm: f64,
    /// Cumulative sample variance after each batch of walks, when requested.
    pub empirical_trace: Vec<(usize, f64)>,
}

impl DivergenceReport {
    pub fn diverging(&self) -> bool {
        self.growth_factor >= 1.0
    }
}

/// Runs `budget` terms of `Σ H̃^i w` without any stopping rule and records
/// how the partial variance evolves.
pub fn divergence_demo(
    problem: &ProblemInstance,
    p: &TransitionHypermatrix,
    init: &InitialDistribution,
    budget: usize,
) -> Result<DivergenceReport> {
    let analyzer = VarianceAnalyzer::new(problem)?;
    let ops = build_hat_operators(problem, p, init)?;
    let first = analyzer.first_moment();
    let w = apply_g(&ops, &analyzer.source)?;
    let mut rows = Vec::with_capacity(budget + 1);
    let mut term = w;
    let mut partial = dot(&ops.h_hat, &term);
    rows.push(PartialSumRow { terms: 0, term_norm: norm_inf(&term), partial_variance: partial - first * first });
    for k in 1..=budget {
        term = apply_h_tilde(&ops, &term)?;
        partial += dot(&ops.h_hat, &term);
        let term_norm = norm_inf(&term);
        rows.push(PartialSumRow { terms: k, term_norm, partial_variance: partial - first * first });
        if !term_norm.is_finite() || term_norm == 0.0 {
            break;
        }
    }
    let growth_factor = match rows.as_slice() {
        [.., a, b] if a.term_norm > 0.0 => b.term_norm / a.term_norm,
        _ => 0.0,
    };
    Ok(DivergenceReport {
        rows,
        growth_factor,
        h_tilde_norm: norm_inf(&apply_h_tilde(&ops, &vec![1.0; problem.dim()])?),
        empirical_trace: Vec::new(),
    })
}

/// Cumulative sample variance of `Z` after each of `batches` equal batches
/// of `spec.num_walks` walks each.
pub fn empirical_variance_trace(
    problem: &ProblemInstance,
    p: &TransitionHypermatrix,
    init: &InitialDistribution,
    spec: &crate::walk::WalkSpec,
    batches: usize,
) -> Result<Vec<(usize, f64)>> {
    let prepared = crate::walk::PreparedWalk::new(problem, p, init)?;
    let mut moments = crate::walk::RunningMoments::new();
    let mut trace = Vec::with_capacity(batches);
    for batch in 0..batches {
        for walk in 0..spec.num_walks {
            let index = (batch * spec.num_walks + walk) as u64;
            moments.push(prepared.sample(spec, index).z_value);
        }
        trace.push((moments.count() as usize, moments.sample_variance()));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn h2() -> SparseMatrix {
        SparseMatrix::from_dense(&[vec![0.2, 0.3], vec![0.4, 0.1]]).unwrap()
    }

    #[test]
    fn hat_operators_example() {
        let prob = ProblemInstance::new(h2(), vec![1.0, 1.0], vec![1.0, 3.0]).unwrap();
        let p = build_hypermatrix(prob.matrix(), 1).unwrap();
        let init = InitialDistribution::from_functional(prob.h()).unwrap();
        let ops = build_hat_operators(&prob, &p, &init).unwrap();
        assert_abs_diff_eq!(ops.h_hat[0], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ops.h_hat[1], 12.0, epsilon = 1e-14);
        let expected = [[0.1, 0.15], [0.2, 0.05]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_abs_diff_eq!(ops.hat_slices[0].get(i, j), v, epsilon = 1e-15);
            }
        }
        let he = apply_h_tilde(&ops, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(he[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(he[1], 0.25, epsilon = 1e-15);
        assert_eq!(apply_g(&ops, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn g_for_two_slices_adds_first_hat() {
        let prob = ProblemInstance::new(h2(), vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let p = build_hypermatrix(prob.matrix(), 2).unwrap();
        let init = InitialDistribution::from_functional(prob.h()).unwrap();
        let ops = build_hat_operators(&prob, &p, &init).unwrap();
        let v = [0.7, -0.2];
        let hv = ops.hat_slices[0].matvec(&v).unwrap();
        let g = apply_g(&ops, &v).unwrap();
        assert_abs_diff_eq!(g[0], v[0] + hv[0], epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], v[1] + hv[1], epsilon = 1e-15);
        assert!(apply_g(&ops, &[1.0]).is_err());
        assert!(apply_h_tilde(&ops, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn solve_x_examples() {
        let d = ProblemInstance::new(SparseMatrix::diagonal(&[0.5, 0.5]), vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let x = solve_x(&d, 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-12);

        let anti = SparseMatrix::from_dense(&[vec![0.0, -0.5], vec![-0.5, 0.0]]).unwrap();
        let prob = ProblemInstance::new(anti, vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let x = solve_x(&prob, 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(x[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 2.0 / 3.0, epsilon = 1e-12);

        let zero_b = ProblemInstance::new(h2(), vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(solve_x(&zero_b, 1e-12, 10).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn richardson_path_converges_and_detects_divergence() {
        let n = DENSE_SOLVE_LIMIT + 8;
        // bidiagonal, ρ = 0.5
        let triplets = (0..n).flat_map(|i| [(i, i, 0.3), (i, (i + 1) % n, 0.2)]);
        let h = SparseMatrix::from_triplets(n, n, triplets).unwrap();
        let b = vec![1.0; n];
        let x = solve_fixed_point(&h, &b, 1e-12, 10_000).unwrap();
        assert!(x.iter().all(|&v| (v - 2.0).abs() < 1e-10));

        let grow = h.scaled(4.0);
        assert!(matches!(solve_fixed_point(&grow, &b, 1e-12, 10_000), Err(Error::Diverged { .. })));
    }

    #[test]
    fn scalar_variance_is_zero() {
        let prob = ProblemInstance::new(SparseMatrix::diagonal(&[0.5]), vec![1.0], vec![1.0]).unwrap();
        let p = build_hypermatrix(prob.matrix(), 1).unwrap();
        let init = InitialDistribution::from_functional(prob.h()).unwrap();
        let r = closed_form_variance(&prob, &p, &init, 1e-14).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.second_moment_term, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.first_moment, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.variance, 0.0, epsilon = 1e-12);
        assert_eq!(r.regime, VarianceRegime::Nonnegative);
    }

    #[test]
    fn zero_b_gives_zero_variance() {
        let prob = ProblemInstance::new(h2(), vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        for m in 1..=3 {
            let p = build_hypermatrix(prob.matrix(), m).unwrap();
            let init = InitialDistribution::from_functional(prob.h()).unwrap();
            let r = closed_form_variance(&prob, &p, &init, 1e-10).unwrap();
            assert_eq!(r.variance, 0.0);
            assert_eq!(r.first_moment, 0.0);
        }
    }

    #[test]
    fn speedup_against_itself_is_one() {
        let prob = ProblemInstance::new(h2(), vec![1.0, 0.5], vec![0.3, 1.0]).unwrap();
        let s = speedup_vs_standard(&prob, 1, 1e-12).unwrap();
        assert_eq!(s.speedup, 1.0);
        let sweep = speedup_sweep(&prob, &[1, 2, 3], 1e-12).unwrap();
        assert_eq!(sweep[0].as_ref().unwrap().speedup, 1.0);
    }

    #[test]
    fn diverged_side_is_named() {
        // 1-way: Ĥ = Diag(row sums)·|H| has ρ > 1 though ρ(|H|) ≈ 0.82
        let h = SparseMatrix::from_dense(&[vec![0.5, 10.0], vec![0.01, 0.5]]).unwrap();
        let prob = ProblemInstance::new(h, vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let err = speedup_vs_standard(&prob, 30, 1e-10).unwrap_err();
        assert!(matches!(err, Error::VarianceDiverged { side: "standard 1-way" }), "{err}");
        let p = build_hypermatrix(prob.matrix(), 1).unwrap();
        let init = InitialDistribution::from_functional(prob.h()).unwrap();
        let r = closed_form_variance(&prob, &p, &init, 1e-10).unwrap();
        assert!(!r.converged);
        assert!(r.variance.is_nan());
    }

    #[test]
    fn divergence_demo_scalar_growth() {
        // Ĥ = [1.28] directly: partial sums grow by 1.28 per term
        let prob = ProblemInstance::new(SparseMatrix::diagonal(&[0.8]), vec![1.0], vec![1.0]).unwrap();
        let ops = HatOperators { h_hat: vec![1.0], hat_slices: vec![SparseMatrix::diagonal(&[1.28])] };
        let analyzer = VarianceAnalyzer::new(&prob).unwrap();
        let report = analyzer.variance_from_ops(&ops, 1e-10, 200).unwrap();
        assert!(!report.converged);
        assert_abs_diff_eq!(report.growth_factor, 1.28, epsilon = 1e-12);

        let p = build_hypermatrix(prob.matrix(), 1).unwrap();
        let init = InitialDistribution::from_functional(prob.h()).unwrap();
        let demo = divergence_demo(&prob, &p, &init, 30).unwrap();
        assert_abs_diff_eq!(demo.growth_factor, 0.64, epsilon = 1e-12);
        assert!(!demo.diverging());
    }
}
