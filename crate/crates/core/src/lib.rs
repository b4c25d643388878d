//! Monte Carlo estimation of linear functionals `⟨h, x⟩` of `x = Hx + b`
//! with multi-way Markov random walks.
//!
//! A standard Ulam-von Neumann walk moves with one transition matrix. Here
//! the walk cycles through `m` matrices `P^(1), …, P^(m)` built from `H`
//! alone, which keeps the variance finite on problems where every 1-way
//! scheme fails: the variance stays bounded whenever `‖H̃‖∞ < 1`, and
//! `‖H̃‖∞ → 0` as `m` grows when `ρ(|H|) < 1`.
//!
//! ```
//! use multiway_mc::{
//!     transition::build_until_contractive, walk::{estimate_functional, WalkSpec},
//!     ProblemInstance, SparseMatrix,
//! };
//!
//! let h = SparseMatrix::from_dense(&[vec![0.5, 10.0], vec![0.01, 0.5]])?;
//! let problem = ProblemInstance::new(h, vec![1.0, 1.0], vec![1.0, 0.0])?;
//! let built = build_until_contractive(problem.matrix(), 64)?;
//! assert!(built.converged);
//!
//! let spec = WalkSpec::with_default_cap(&built.hypermatrix, 1e-8, 20_000, 7)?;
//! let report = estimate_functional(&problem, &built.hypermatrix, &spec)?;
//! // x = (I − H)⁻¹ b has x_1 = 10.5 / 0.15.
//! assert!((report.estimate - 70.0).abs() < 6.0 * report.probable_error);
//! # Ok::<(), multiway_mc::Error>(())
//! ```
//!
//! Modules, bottom-up: [`sparse`] (CSR storage, Matrix Market, synthetic
//! matrices, spectral radius), [`transition`] (the hypermatrix builder),
//! [`walk`] (sampling and the estimator), [`variance`] (the closed form and
//! the speed-up ratio) and [`experiment`] (the sweeps behind the CLI).

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod problem;
pub mod rng;
pub mod sparse;
pub mod transition;
pub mod variance;
pub mod walk;

pub use error::{Error, Result};
pub use problem::ProblemInstance;
pub use sparse::SparseMatrix;
pub use transition::{InitialDistribution, TransitionHypermatrix};

// The book's code listings run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/matrices.md")]
    mod matrices {}
    #[doc = include_str!("../../../book/src/hypermatrix.md")]
    mod hypermatrix {}
    #[doc = include_str!("../../../book/src/walks.md")]
    mod walks {}
    #[doc = include_str!("../../../book/src/variance.md")]
    mod variance {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
