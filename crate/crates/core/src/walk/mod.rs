//! Simulation of the m-way walk and the functional estimator built on it.
//!
//! A walk starts at `k₀ ~ p` with weight `W₀ = h_{k₀}/p_{k₀}` and at step `ℓ`
//! moves along slice `P^(ℓ mod m + 1)`, multiplying the weight by
//! `H_ij / P_ij`. One realization is `Z = Σ_ℓ W_ℓ b_{k_ℓ}`, truncated at the
//! first `N` with `|W_N| ≤ ε|W₀|`. Its expectation is `⟨h, x⟩`.
//!
//! Every walk draws from its own ChaCha stream `(seed, walk_index)`, and the
//! batch is reduced in a fixed block order, so an [`EstimateReport`] is a pure
//! function of its inputs whatever the thread count.

mod stats;

pub use stats::RunningMoments;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::rng::stream_rng;
use crate::transition::{check_pattern, InitialDistribution, TransitionHypermatrix};

/// Default truncation threshold ε.
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const MIN_DEFAULT_STEPS: usize = 100;
pub const MAX_DEFAULT_STEPS: usize = 1_000_000;

/// Half-width factor of the probable error under the normal approximation.
pub const PROBABLE_ERROR_FACTOR: f64 = 0.6745;

// Walks per reduction block. Changing it changes the floating-point
// reduction order and therefore the last bits of reports.
const BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkSpec {
    pub epsilon: f64,
    pub max_steps: usize,
    pub num_walks: usize,
    pub seed: u64,
}

impl WalkSpec {
    pub fn new(epsilon: f64, max_steps: usize, num_walks: usize, seed: u64) -> Result<Self> {
        let spec = Self { epsilon, max_steps, num_walks, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec whose step cap comes from [`default_max_steps`].
    pub fn with_default_cap(p: &TransitionHypermatrix, epsilon: f64, num_walks: usize, seed: u64) -> Result<Self> {
        Self::new(epsilon, default_max_steps(p, epsilon), num_walks, seed)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter { name: "epsilon", reason: format!("{} must be positive", self.epsilon) });
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter { name: "max_steps", reason: "must be at least 1".into() });
        }
        if self.num_walks == 0 {
            return Err(Error::InvalidParameter { name: "num_walks", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// `10·⌈log ε / log η̄⌉` clamped to `[100, 10⁶]`, where
/// `η̄ = (max_i η^(1)_i)^(1/m)` is the per-step decay of `|W|` along the
/// slowest row.
pub fn default_max_steps(p: &TransitionHypermatrix, epsilon: f64) -> usize {
    let top = p.eta(1).iter().fold(0.0f64, |a, &v| a.max(v));
    let per_step = top.powf(1.0 / p.m() as f64);
    if !(per_step < 1.0) || !(epsilon < 1.0) {
        return MAX_DEFAULT_STEPS;
    }
    let steps = 10.0 * (epsilon.ln() / per_step.ln()).ceil();
    (steps as usize).clamp(MIN_DEFAULT_STEPS, MAX_DEFAULT_STEPS)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkOutcome {
    pub z_value: f64,
    pub steps_taken: usize,
    pub truncated_by_cap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateReport {
    /// Mean of the `M` realizations of `Z`.
    pub estimate: f64,
    /// Unbiased (divisor `M − 1`).
    pub sample_variance: f64,
    /// `0.6745·√(sample_variance / M)`.
    pub probable_error: f64,
    pub mean_walk_length: f64,
    pub cap_hit_fraction: f64,
    pub num_walks: usize,
}

/// Problem, hypermatrix and initial distribution, validated together and
/// laid out for sampling: per-row cumulative sums for every slice and the
/// weight multipliers `H_ij / P_ij`.
#[derive(Debug)]
pub struct PreparedWalk<'a> {
    problem: &'a ProblemInstance,
    m: usize,
    /// `cumulative[s]` has the same layout as slice `s + 1`'s values.
    cumulative: Vec<Vec<f64>>,
    multipliers: Vec<Vec<f64>>,
    initial_cumulative: Vec<f64>,
    last_start: usize,
    start_weights: Vec<f64>,
}

impl<'a> PreparedWalk<'a> {
    pub fn new(problem: &'a ProblemInstance, p: &TransitionHypermatrix, init: &InitialDistribution) -> Result<Self> {
        let h = problem.matrix();
        if p.dim() != problem.dim() {
            return Err(Error::DimensionMismatch { expected: problem.dim(), actual: p.dim() });
        }
        check_pattern(h, p)?;
        init.check_covers(problem.h())?;

        let mut cumulative = Vec::with_capacity(p.m());
        let mut multipliers = Vec::with_capacity(p.m());
        for slice in p.slices() {
            let mut cum = Vec::with_capacity(slice.nnz());
            for i in 0..slice.n_rows() {
                let mut acc = 0.0;
                for &v in slice.row(i).1 {
                    acc += v;
                    cum.push(acc);
                }
            }
            cumulative.push(cum);
            multipliers.push(h.values().iter().zip(slice.values()).map(|(a, q)| a / q).collect());
        }

        let probs = init.probabilities();
        let mut acc = 0.0;
        let initial_cumulative: Vec<f64> = probs
            .iter()
            .map(|&q| {
                acc += q;
                acc
            })
            .collect();
        let last_start = probs.iter().rposition(|&q| q > 0.0).ok_or(Error::ZeroFunctional)?;
        let start_weights = problem
            .h()
            .iter()
            .zip(probs)
            .map(|(&hi, &q)| if q > 0.0 { hi / q } else { 0.0 })
            .collect();

        Ok(Self {
            problem,
            m: p.m(),
            cumulative,
            multipliers,
            initial_cumulative,
            last_start,
            start_weights,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// One truncated realization of `Z`.
    pub fn sample(&self, spec: &WalkSpec, walk_index: u64) -> WalkOutcome {
        let mut rng = stream_rng(spec.seed, walk_index);
        let h = self.problem.matrix();
        let row_ptr = h.row_ptr();
        let cols = h.col_indices();
        let b = self.problem.b();

        let mut k = pick(&self.initial_cumulative, rng.random::<f64>()).min(self.last_start);
        let w0 = self.start_weights[k];
        let threshold = spec.epsilon * w0.abs();
        let mut w = w0;
        let mut z = KahanSum::new(w * b[k]);
        let mut step = 0usize;
        loop {
            // subnormal |W| counts as meeting the criterion
            if w.abs() <= threshold || w.abs() < f64::MIN_POSITIVE {
                return WalkOutcome { z_value: z.total(), steps_taken: step, truncated_by_cap: false };
            }
            if step == spec.max_steps {
                return WalkOutcome { z_value: z.total(), steps_taken: step, truncated_by_cap: true };
            }
            let s = step % self.m;
            let (lo, hi) = (row_ptr[k], row_ptr[k + 1]);
            let offset = lo + pick(&self.cumulative[s][lo..hi], rng.random::<f64>()).min(hi - lo - 1);
            w *= self.multipliers[s][offset];
            k = cols[offset];
            z.add(w * b[k]);
            step += 1;
        }
    }

    /// Aggregates `spec.num_walks` walks.
    pub fn estimate(&self, spec: &WalkSpec) -> Result<EstimateReport> {
        spec.validate()?;
        if spec.num_walks < 2 {
            return Err(Error::InvalidParameter { name: "num_walks", reason: "at least 2 walks are needed for a variance".into() });
        }
        let blocks = spec.num_walks.div_ceil(BLOCK);
        let partials: Vec<BlockTotals> = (0..blocks)
            .into_par_iter()
            .map(|block| {
                let start = block * BLOCK;
                let end = (start + BLOCK).min(spec.num_walks);
                let mut totals = BlockTotals::default();
                for walk in start..end {
                    let outcome = self.sample(spec, walk as u64);
                    totals.moments.push(outcome.z_value);
                    totals.steps += outcome.steps_taken as u64;
                    totals.cap_hits += outcome.truncated_by_cap as u64;
                }
                totals
            })
            .collect();

        let mut all = BlockTotals::default();
        for part in &partials {
            all.moments.merge(&part.moments);
            all.steps += part.steps;
            all.cap_hits += part.cap_hits;
        }
        let walks = spec.num_walks as f64;
        let sample_variance = all.moments.sample_variance().max(0.0);
        Ok(EstimateReport {
            estimate: all.moments.mean(),
            sample_variance,
            probable_error: PROBABLE_ERROR_FACTOR * (sample_variance / walks).sqrt(),
            mean_walk_length: all.steps as f64 / walks,
            cap_hit_fraction: all.cap_hits as f64 / walks,
            num_walks: spec.num_walks,
        })
    }
}

/// Single walk with index `walk_index`; see [`PreparedWalk::sample`] for the
/// batched form.
pub fn sample_walk(
    problem: &ProblemInstance,
    p: &TransitionHypermatrix,
    init: &InitialDistribution,
    spec: &WalkSpec,
    walk_index: u64,
) -> Result<WalkOutcome> {
    spec.validate()?;
    Ok(PreparedWalk::new(problem, p, init)?.sample(spec, walk_index))
}

/// Estimates `⟨h, x⟩` with the initial distribution `p_i ∝ |h_i|`.
pub fn estimate_functional(problem: &ProblemInstance, p: &TransitionHypermatrix, spec: &WalkSpec) -> Result<EstimateReport> {
    let init = InitialDistribution::from_functional(problem.h())?;
    estimate_functional_with(problem, p, &init, spec)
}

/// Same as [`estimate_functional`] with a caller-chosen initial distribution.
pub fn estimate_functional_with(
    problem: &ProblemInstance,
    p: &TransitionHypermatrix,
    init: &InitialDistribution,
    spec: &WalkSpec,
) -> Result<EstimateReport> {
    PreparedWalk::new(problem, p, init)?.estimate(spec)
}

/// Sample variance of `Z` over `spec.num_walks` walks.
pub fn empirical_variance_of_z(problem: &ProblemInstance, p: &TransitionHypermatrix, spec: &WalkSpec) -> Result<f64> {
    Ok(estimate_functional(problem, p, spec)?.sample_variance)
}

#[derive(Debug, Default)]
struct BlockTotals {
    moments: RunningMoments,
    steps: u64,
    cap_hits: u64,
}

/// First index whose cumulative value exceeds `u·total`.
#[inline]
fn pick(cumulative: &[f64], u: f64) -> usize {
    let target = u * cumulative[cumulative.len() - 1];
    cumulative.partition_point(|&c| c <= target)
}

struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn new(first: f64) -> Self {
        Self { sum: first, carry: 0.0 }
    }

    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;
    use crate::transition::build_hypermatrix;
    use approx::assert_abs_diff_eq;

    fn scalar_problem() -> (ProblemInstance, TransitionHypermatrix) {
        let h = SparseMatrix::from_dense(&[vec![0.5]]).unwrap();
        let p = build_hypermatrix(&h, 1).unwrap();
        (ProblemInstance::new(h, vec![1.0], vec![1.0]).unwrap(), p)
    }

    #[test]
    fn scalar_walk_is_deterministic() {
        let (prob, p) = scalar_problem();
        let init = InitialDistribution::from_functional(prob.h()).unwrap();
        let spec = WalkSpec::new(0.5, 1000, 1, 0).unwrap();
        let out = sample_walk(&prob, &p, &init, &spec, 0).unwrap();
        assert_eq!(out.steps_taken, 1);
        assert_eq!(out.z_value, 1.5);
        assert!(!out.truncated_by_cap);
    }

    #[test]
    fn scalar_estimate_matches_geometric_series() {
        let (prob, p) = scalar_problem();
        let spec = WalkSpec::new(1e-6, 1000, 64, 3).unwrap();
        let r = estimate_functional(&prob, &p, &spec).unwrap();
        assert!(r.estimate <= 2.0 && r.estimate >= 2.0 - 1e-5, "{}", r.estimate);
        assert_eq!(r.sample_variance, 0.0);
        assert_eq!(r.probable_error, 0.0);
        assert_eq!(r.mean_walk_length, 20.0);
    }

    #[test]
    fn basis_functional_starts_at_its_index() {
        let h = SparseMatrix::diagonal(&[0.5, 0.5]);
        let p = build_hypermatrix(&h, 1).unwrap();
        let prob = ProblemInstance::new(h, vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let init = InitialDistribution::from_functional(prob.h()).unwrap();
        let spec = WalkSpec::new(0.9, 100, 1, 11).unwrap();
        for walk in 0..20 {
            // one step: W₀ = 1, then 0.5 ≤ 0.9
            let out = sample_walk(&prob, &p, &init, &spec, walk).unwrap();
            assert_eq!(out.steps_taken, 1);
            assert_eq!(out.z_value, 1.5);
        }
        let spec = WalkSpec::new(1e-12, 1000, 100, 5).unwrap();
        let r = estimate_functional(&prob, &p, &spec).unwrap();
        assert_abs_diff_eq!(r.estimate, 2.0, epsilon = 1e-11);
        assert!(r.sample_variance < 1e-20);
    }

    #[test]
    fn mao_start_weight_is_signed_one_norm() {
        let h = SparseMatrix::from_dense(&[vec![0.2, 0.3], vec![0.4, 0.1]]).unwrap();
        let p = build_hypermatrix(&h, 1).unwrap();
        let hv = vec![-1.0, 3.0];
        let prob = ProblemInstance::new(h, vec![1.0, 0.0], hv).unwrap();
        let init = InitialDistribution::from_functional(prob.h()).unwrap();
        // ε ≥ 1 stops before the first move, leaving z = W₀ b_{k₀}
        let spec = WalkSpec::new(1.0, 10, 1, 0).unwrap();
        let mut seen = [false; 2];
        for walk in 0..64 {
            let out = sample_walk(&prob, &p, &init, &spec, walk).unwrap();
            assert_eq!(out.steps_taken, 0);
            match out.z_value {
                -4.0 => seen[0] = true,
                0.0 => seen[1] = true,
                z => panic!("unexpected z {z}"),
            }
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn cap_is_reported() {
        let h = SparseMatrix::from_dense(&[vec![0.99]]).unwrap();
        let p = build_hypermatrix(&h, 1).unwrap();
        let prob = ProblemInstance::new(h, vec![1.0], vec![1.0]).unwrap();
        let spec = WalkSpec::new(1e-6, 10, 4, 0).unwrap();
        let r = estimate_functional(&prob, &p, &spec).unwrap();
        assert_eq!(r.cap_hit_fraction, 1.0);
        assert_eq!(r.mean_walk_length, 10.0);
    }

    #[test]
    fn rejects_uncovered_support_and_bad_specs() {
        let h = SparseMatrix::from_dense(&[vec![0.2, 0.3], vec![0.4, 0.1]]).unwrap();
        let p = build_hypermatrix(&h, 1).unwrap();
        let prob = ProblemInstance::new(h, vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let init = InitialDistribution::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(PreparedWalk::new(&prob, &p, &init), Err(Error::SupportMismatch { index: 1 })));
        assert!(WalkSpec::new(0.0, 10, 10, 0).is_err());
        assert!(WalkSpec::new(1e-3, 0, 10, 0).is_err());
        let single = WalkSpec::new(1e-3, 10, 1, 0).unwrap();
        assert!(estimate_functional(&prob, &p, &single).is_err());
    }

    #[test]
    fn rejects_foreign_pattern() {
        let h = SparseMatrix::from_dense(&[vec![0.2, 0.3], vec![0.4, 0.1]]).unwrap();
        let other = SparseMatrix::from_dense(&[vec![0.2, 0.3], vec![0.4, 0.0]]).unwrap();
        let p = build_hypermatrix(&other, 1).unwrap();
        let prob = ProblemInstance::new(h, vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let spec = WalkSpec::new(1e-3, 10, 10, 0).unwrap();
        assert!(matches!(estimate_functional(&prob, &p, &spec), Err(Error::InvalidTransition { .. })));
    }

    #[test]
    fn default_cap_tracks_decay() {
        let h = SparseMatrix::from_dense(&[vec![0.2, 0.3], vec![0.4, 0.1]]).unwrap();
        let p = build_hypermatrix(&h, 1).unwrap();
        // log(1e-6)/log(0.5) = 19.9 → 20 → 200
        assert_eq!(default_max_steps(&p, 1e-6), 200);
        assert_eq!(default_max_steps(&p, 0.9), MIN_DEFAULT_STEPS);
        let h = SparseMatrix::from_dense(&[vec![0.6, 0.6], vec![0.0, 0.5]]).unwrap();
        assert_eq!(default_max_steps(&build_hypermatrix(&h, 1).unwrap(), 1e-6), MAX_DEFAULT_STEPS);
    }

    #[test]
    fn variance_scales_quadratically_with_h_at_fixed_p() {
        let h = SparseMatrix::from_dense(&[vec![0.2, 0.3], vec![0.4, 0.1]]).unwrap();
        let p = build_hypermatrix(&h, 1).unwrap();
        let prob = ProblemInstance::new(h, vec![1.0, 0.5], vec![1.0, 2.0]).unwrap();
        let scaled = prob.with_functional(vec![3.0, 6.0]).unwrap();
        let init = InitialDistribution::from_functional(prob.h()).unwrap();
        let spec = WalkSpec::new(1e-8, 1000, 5000, 9).unwrap();
        let a = estimate_functional_with(&prob, &p, &init, &spec).unwrap();
        let b = estimate_functional_with(&scaled, &p, &init, &spec).unwrap();
        assert_abs_diff_eq!(b.sample_variance, 9.0 * a.sample_variance, epsilon = 1e-9 * b.sample_variance);
    }
}
