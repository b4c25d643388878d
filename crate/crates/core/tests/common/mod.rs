#![allow(dead_code)]

use multiway_mc::experiment::random_vectors;
use multiway_mc::rng::{derive_seed, stream_rng};
use multiway_mc::sparse::{spectral_radius_nonneg, sprand_without_empty_lines, DEFAULT_EIG_MAX_ITERS, DEFAULT_EIG_TOL};
use multiway_mc::variance::HatOperators;
use multiway_mc::{ProblemInstance, SparseMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn identity(n: usize) -> Dense {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let k = b.len();
    let cols = b[0].len();
    let mut out = vec![vec![0.0; cols]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l] != 0.0 {
                for j in 0..cols {
                    out[i][j] += a[i][l] * b[l][j];
                }
            }
        }
    }
    out
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

pub fn apply(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// Solves `a x = rhs` with dense LU.
pub fn solve(a: &Dense, rhs: &[f64]) -> Vec<f64> {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    m.lu().solve(&DVector::from_column_slice(rhs)).expect("nonsingular").iter().copied().collect()
}

/// `x = (I − H)⁻¹ b`.
pub fn direct_solution(h: &SparseMatrix, b: &[f64]) -> Vec<f64> {
    let n = h.n_rows();
    let dense = h.to_dense();
    let a: Dense = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 } - dense[i][j]).collect()).collect();
    solve(&a, b)
}

/// Explicit `H̃ = Ĥ^(1)⋯Ĥ^(m)`.
pub fn dense_h_tilde(ops: &HatOperators) -> Dense {
    ops.hat_slices.iter().fold(identity(ops.dim()), |acc, s| mul(&acc, &s.to_dense()))
}

/// Explicit `G = I + Ĥ^(1) + ⋯ + Ĥ^(1)⋯Ĥ^(m−1)`.
pub fn dense_g(ops: &HatOperators) -> Dense {
    let n = ops.dim();
    let mut prefix = identity(n);
    let mut g = identity(n);
    for s in &ops.hat_slices[..ops.m() - 1] {
        prefix = mul(&prefix, &s.to_dense());
        g = add(&g, &prefix);
    }
    g
}

pub fn row_max(a: &Dense) -> f64 {
    a.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Nonnegative synthetic instance rescaled to `ρ(H) = rho`, with `b, h`
/// uniform on (0,1).
pub fn synthetic_problem(n: usize, density: f64, rho: f64, seed: u64) -> ProblemInstance {
    let synth = sprand_without_empty_lines(n, density, seed).unwrap();
    let radius = spectral_radius_nonneg(&synth.matrix, DEFAULT_EIG_TOL, DEFAULT_EIG_MAX_ITERS).unwrap().radius;
    let h = synth.matrix.scaled(rho / radius);
    let (b, hv) = random_vectors(n, derive_seed(seed, 1));
    ProblemInstance::new(h, b, hv).unwrap()
}

/// Random matrix with a full diagonal, so no row or column is empty, and
/// entries of either sign.
pub fn signed_matrix(n: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut rng = stream_rng(seed, 7);
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || rng.random::<f64>() < density {
                let v: f64 = rng.random_range(0.05..1.0);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                triplets.push((i, j, sign * v));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, triplets).unwrap()
}
