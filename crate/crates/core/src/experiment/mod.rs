//! Experiment drivers behind the `mwmc` binary: solvable-ratio sweeps,
//! speed-up tables, single solves, diagnostics and the divergence demo.
//!
//! Every trial derives its own seed from the configured master seed and the
//! trial index, so a configuration reproduces byte-identical CSV regardless
//! of how many worker threads run the trials.

mod config;
mod report;

pub use config::{ExperimentConfig, MatrixSource, Mode, DEFAULT_RATIO_RADII, DEFAULT_SEED, DEFAULT_SPEEDUP_RADII};
pub use report::{
    demo_csv, diagnose_csv, ratio_csv, render_demo, render_diagnose, render_ratio, render_solve, render_speedup,
    solve_csv, speedup_csv,
};

use std::path::{Path, PathBuf};

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::rng::{derive_seed, stream_rng};
use crate::sparse::{
    diagonal_precondition, load_matrix_market, spectral_radius_nonneg, sprand_without_empty_lines, SparseMatrix,
    DEFAULT_EIG_MAX_ITERS, DEFAULT_EIG_TOL,
};
use crate::transition::{build_hypermatrix, build_until_contractive, HypermatrixBuilder, InitialDistribution};
use crate::variance::{divergence_demo, empirical_variance_trace, speedup_sweep, DivergenceReport, VarianceAnalyzer, VarianceReport};
use crate::walk::{EstimateReport, PreparedWalk, WalkSpec};

/// Tolerance for declaring `H⁺e` a constant vector.
pub const CONSTANT_ROW_SUM_TOL: f64 = 1e-12;

/// Base matrix of one synthetic trial, before rescaling.
#[derive(Debug, Clone)]
pub struct SyntheticTrial {
    pub matrix: SparseMatrix,
    /// `ρ(matrix)`, the matrix being nonnegative.
    pub radius: f64,
    pub seed: u64,
    pub retries: usize,
}

impl SyntheticTrial {
    /// Trial `index` under `seed`; empty rows or columns trigger a redraw.
    pub fn generate(n: usize, density: f64, seed: u64, index: usize) -> Result<Self> {
        let trial_seed = derive_seed(seed, index as u64);
        let synth = sprand_without_empty_lines(n, density, trial_seed)?;
        let radius = spectral_radius_nonneg(&synth.matrix, DEFAULT_EIG_TOL, DEFAULT_EIG_MAX_ITERS)?.radius;
        Ok(Self { matrix: synth.matrix, radius, seed: trial_seed, retries: synth.retries })
    }

    /// `r·H/ρ(H)`.
    pub fn rescaled(&self, r: f64) -> SparseMatrix {
        self.matrix.scaled(r / self.radius)
    }

    /// `b` and `h` with entries uniform on (0,1), drawn from this trial's seed.
    pub fn vectors(&self) -> (Vec<f64>, Vec<f64>) {
        random_vectors(self.matrix.n_rows(), self.seed)
    }
}

/// Two vectors with i.i.d. entries uniform on (0,1).
pub fn random_vectors(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, 1);
    let b = (0..n).map(|_| rng.sample::<f64, _>(Open01)).collect();
    let h = (0..n).map(|_| rng.sample::<f64, _>(Open01)).collect();
    (b, h)
}

/// `H = I − Diag(A)⁻¹A` for the matrix stored at `path`.
pub fn load_preconditioned(path: &Path) -> Result<SparseMatrix> {
    diagonal_precondition(&load_matrix_market(path)?)
}

/// True when every row of `|H|` has the same sum up to a relative
/// [`CONSTANT_ROW_SUM_TOL`]; all slices then coincide and every m-way walk
/// equals the standard one.
pub fn has_constant_row_sums(h: &SparseMatrix) -> bool {
    let sums = h.abs_row_sums();
    let (lo, hi) = sums.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    hi - lo <= CONSTANT_ROW_SUM_TOL * hi
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub rho: f64,
    pub m: usize,
    pub solvable_fraction: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Fraction of synthetic problems with `‖H̃‖∞ < 1`, per `(ρ, m)` cell.
///
/// Trial `t` uses the same base matrix for every radius and every `m`.
pub fn run_ratio_experiment(cfg: &ExperimentConfig) -> Result<Vec<RatioRow>> {
    cfg.validate()?;
    let MatrixSource::Synthetic { n, density } = cfg.source else {
        return Err(Error::InvalidParameter { name: "matrix", reason: "ratio experiments need a synthetic source".into() });
    };
    let top = cfg.m_list.iter().copied().max().unwrap_or(1);
    // solvable[trial][radius][m index]
    let solvable: Vec<Vec<Vec<bool>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let trial = SyntheticTrial::generate(n, density, cfg.seed, t)?;
            cfg.radius_list
                .iter()
                .map(|&r| {
                    let mut builder = HypermatrixBuilder::new(&trial.rescaled(r))?;
                    let mut norms = Vec::with_capacity(top);
                    for _ in 0..top {
                        builder.extend()?;
                        norms.push(builder.h_tilde_norm());
                    }
                    Ok(cfg.m_list.iter().map(|&m| norms[m - 1] < 1.0).collect())
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cfg.radius_list.len() * cfg.m_list.len());
    for (ri, &rho) in cfg.radius_list.iter().enumerate() {
        for (mi, &m) in cfg.m_list.iter().enumerate() {
            let count = solvable.iter().filter(|t| t[ri][mi]).count();
            rows.push(RatioRow {
                rho,
                m,
                solvable_fraction: count as f64 / cfg.trials as f64,
                trials: cfg.trials,
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    /// Target `ρ(H⁺)`; `None` for rows aggregated over matrix files.
    pub rho: Option<f64>,
    pub m: usize,
    /// `None` when every trial of the cell was excluded.
    pub mean_speedup: Option<f64>,
    pub trials_used: usize,
    pub trials_excluded: usize,
    pub seed: u64,
}

/// Why a trial did not contribute to a speed-up cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Exclusion {
    /// `H⁺e = γe`: the m-way walk coincides with the standard one.
    ConstantRowSums,
    /// `ρ(H⁺) ≥ 1` (or not measurable) for a loaded matrix.
    NotConvergent(String),
    /// Closed-form variance diverged on one side.
    Diverged(String),
    /// The instance failed validation.
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct SpeedupOutcome {
    pub rows: Vec<SpeedupRow>,
    /// `(label, m or None, reason)` for every excluded trial/cell pair.
    pub exclusions: Vec<(String, Option<usize>, Exclusion)>,
}

type TrialSpeedups = std::result::Result<Vec<std::result::Result<f64, Exclusion>>, Exclusion>;

/// Per-trial speed-ups for every `m` in `ms`, or a whole-trial exclusion.
pub fn trial_speedups(h: SparseMatrix, b: Vec<f64>, hv: Vec<f64>, ms: &[usize], tol: f64) -> TrialSpeedups {
    if has_constant_row_sums(&h) {
        return Err(Exclusion::ConstantRowSums);
    }
    let problem = ProblemInstance::new(h, b, hv).map_err(|e| Exclusion::Invalid(e.to_string()))?;
    let sweep = speedup_sweep(&problem, ms, tol).map_err(|e| Exclusion::Invalid(e.to_string()))?;
    Ok(sweep
        .into_iter()
        .map(|r| match r {
            Ok(s) => Ok(s.speedup),
            Err(e @ Error::VarianceDiverged { .. }) => Err(Exclusion::Diverged(e.to_string())),
            Err(e) => Err(Exclusion::Invalid(e.to_string())),
        })
        .collect())
}

/// Mean `Var[X]/Var[Z]` per cell over the configured trials (synthetic) or
/// over the listed matrix files.
pub fn run_speedup_experiment(cfg: &ExperimentConfig) -> Result<SpeedupOutcome> {
    cfg.validate()?;
    match &cfg.source {
        MatrixSource::Synthetic { n, density } => {
            let (n, density) = (*n, *density);
            let per_trial: Vec<Vec<TrialSpeedups>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let trial = SyntheticTrial::generate(n, density, cfg.seed, t)?;
                    let (b, h) = trial.vectors();
                    Ok(cfg
                        .radius_list
                        .iter()
                        .map(|&r| trial_speedups(trial.rescaled(r), b.clone(), h.clone(), &cfg.m_list, cfg.tol))
                        .collect())
                })
                .collect::<Result<_>>()?;
            let mut rows = Vec::new();
            let mut exclusions = Vec::new();
            for (ri, &rho) in cfg.radius_list.iter().enumerate() {
                let cell: Vec<(String, &TrialSpeedups)> =
                    per_trial.iter().enumerate().map(|(t, v)| (format!("rho={rho} trial={t}"), &v[ri])).collect();
                aggregate(Some(rho), &cell, cfg, &mut rows, &mut exclusions);
            }
            Ok(SpeedupOutcome { rows, exclusions })
        }
        MatrixSource::Files(files) => {
            let per_file: Vec<TrialSpeedups> = files
                .par_iter()
                .enumerate()
                .map(|(k, path)| file_speedups(path, derive_seed(cfg.seed, k as u64), cfg))
                .collect();
            let cell: Vec<(String, &TrialSpeedups)> =
                files.iter().map(|p| p.display().to_string()).zip(per_file.iter()).collect();
            let mut rows = Vec::new();
            let mut exclusions = Vec::new();
            aggregate(None, &cell, cfg, &mut rows, &mut exclusions);
            Ok(SpeedupOutcome { rows, exclusions })
        }
    }
}

fn file_speedups(path: &Path, seed: u64, cfg: &ExperimentConfig) -> TrialSpeedups {
    let h = load_preconditioned(path).map_err(|e| Exclusion::Invalid(e.to_string()))?;
    match spectral_radius_nonneg(&h.abs(), DEFAULT_EIG_TOL, DEFAULT_EIG_MAX_ITERS) {
        Ok(est) if est.radius < 1.0 => {}
        Ok(est) => return Err(Exclusion::NotConvergent(format!("rho(H+) = {}", est.radius))),
        Err(e) => return Err(Exclusion::NotConvergent(e.to_string())),
    }
    let (b, hv) = random_vectors(h.n_rows(), seed);
    trial_speedups(h, b, hv, &cfg.m_list, cfg.tol)
}

fn aggregate(
    rho: Option<f64>,
    cell: &[(String, &TrialSpeedups)],
    cfg: &ExperimentConfig,
    rows: &mut Vec<SpeedupRow>,
    exclusions: &mut Vec<(String, Option<usize>, Exclusion)>,
) {
    for (label, trial) in cell {
        if let Err(reason) = trial {
            exclusions.push((label.clone(), None, reason.clone()));
        }
    }
    for (mi, &m) in cfg.m_list.iter().enumerate() {
        let mut sum = 0.0;
        let mut used = 0;
        for (label, trial) in cell {
            if let Ok(values) = trial {
                match &values[mi] {
                    Ok(s) => {
                        sum += s;
                        used += 1;
                    }
                    Err(reason) => exclusions.push((label.clone(), Some(m), reason.clone())),
                }
            }
        }
        rows.push(SpeedupRow {
            rho,
            m,
            mean_speedup: (used > 0).then(|| sum / used as f64),
            trials_used: used,
            trials_excluded: cell.len() - used,
            seed: cfg.seed,
        });
    }
}

#[derive(Debug, Clone)]
pub struct DiagnoseReport {
    pub label: String,
    pub n: usize,
    pub nnz: usize,
    /// `ρ(H⁺)`, or the eigensolver failure.
    pub rho_abs: std::result::Result<f64, String>,
    pub infinity_norm: f64,
    /// `‖H̃‖∞` for `m = 1, 2, …`.
    pub h_tilde_norms: Vec<f64>,
    pub first_contractive: Option<usize>,
    /// Set when the slice recurrence stopped early (starving row).
    pub stopped: Option<String>,
}

impl DiagnoseReport {
    pub fn solvable(&self) -> bool {
        self.first_contractive.is_some()
    }
}

/// `ρ(H⁺)`, `‖H‖∞` and the `‖H̃‖∞` sequence for `m = 1 … phi_max`.
pub fn diagnose_matrix(label: impl Into<String>, h: &SparseMatrix, phi_max: usize) -> Result<DiagnoseReport> {
    let rho_abs = spectral_radius_nonneg(&h.abs(), DEFAULT_EIG_TOL, DEFAULT_EIG_MAX_ITERS)
        .map(|e| e.radius)
        .map_err(|e| e.to_string());
    let mut builder = HypermatrixBuilder::new(h)?;
    let mut h_tilde_norms = Vec::with_capacity(phi_max);
    let mut stopped = None;
    for _ in 0..phi_max {
        if let Err(e) = builder.extend() {
            stopped = Some(e.to_string());
            break;
        }
        h_tilde_norms.push(builder.h_tilde_norm());
    }
    let first_contractive = h_tilde_norms.iter().position(|&v| v < 1.0).map(|k| k + 1);
    Ok(DiagnoseReport {
        label: label.into(),
        n: h.n_rows(),
        nnz: h.nnz(),
        rho_abs,
        infinity_norm: h.infinity_norm(),
        h_tilde_norms,
        first_contractive,
        stopped,
    })
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub label: String,
    pub n: usize,
    pub m_used: usize,
    /// `‖H̃‖∞ < 1` for the hypermatrix used.
    pub contractive: bool,
    pub h_tilde_norm: f64,
    pub estimate: EstimateReport,
    pub variance: VarianceReport,
    /// `⟨h, x⟩` from the deterministic solve.
    pub direct: f64,
    pub max_steps: usize,
}

impl SolveReport {
    pub fn residual(&self) -> f64 {
        (self.estimate.estimate - self.direct).abs()
    }
}

/// End-to-end estimate of `⟨h, x⟩` for one problem.
///
/// `m = None` grows the hypermatrix until contractive (up to `phi_max`).
#[allow(clippy::too_many_arguments)]
pub fn solve_problem(
    label: impl Into<String>,
    problem: &ProblemInstance,
    m: Option<usize>,
    phi_max: usize,
    epsilon: f64,
    num_walks: usize,
    seed: u64,
    tol: f64,
) -> Result<SolveReport> {
    let p = match m {
        Some(m) => build_hypermatrix(problem.matrix(), m)?,
        None => build_until_contractive(problem.matrix(), phi_max)?.hypermatrix,
    };
    let init = InitialDistribution::from_functional(problem.h())?;
    let spec = WalkSpec::with_default_cap(&p, epsilon, num_walks, seed)?;
    let estimate = PreparedWalk::new(problem, &p, &init)?.estimate(&spec)?;
    let analyzer = VarianceAnalyzer::new(problem)?;
    let variance = analyzer.variance(&p, &init, tol)?;
    let h_tilde_norm = p.h_tilde_norm();
    Ok(SolveReport {
        label: label.into(),
        n: problem.dim(),
        m_used: p.m(),
        contractive: h_tilde_norm < 1.0,
        h_tilde_norm,
        estimate,
        variance,
        direct: analyzer.first_moment(),
        max_steps: spec.max_steps,
    })
}

#[derive(Debug, Clone)]
pub struct DemoReport {
    pub label: String,
    pub standard: DivergenceReport,
    pub multiway: DivergenceReport,
    pub multiway_m: usize,
    pub multiway_contractive: bool,
}

/// Partial-sum growth of the standard walk next to the m-way walk found by
/// [`build_until_contractive`], with empirical variance traces.
pub fn run_divergence_demo(
    label: impl Into<String>,
    problem: &ProblemInstance,
    cfg: &ExperimentConfig,
) -> Result<DemoReport> {
    let init = InitialDistribution::from_functional(problem.h())?;
    let one = build_hypermatrix(problem.matrix(), 1)?;
    let outcome = build_until_contractive(problem.matrix(), cfg.phi_max)?;
    let batches = 10;
    let per_batch = (cfg.num_walks / batches).max(2);
    let mut reports = Vec::with_capacity(2);
    for p in [&one, &outcome.hypermatrix] {
        let mut report = divergence_demo(problem, p, &init, cfg.budget)?;
        let spec = WalkSpec::with_default_cap(p, cfg.epsilon, per_batch, cfg.seed)?;
        report.empirical_trace = empirical_variance_trace(problem, p, &init, &spec, batches)?;
        reports.push(report);
    }
    let multiway = reports.pop().expect("two reports");
    let standard = reports.pop().expect("two reports");
    Ok(DemoReport {
        label: label.into(),
        standard,
        multiway,
        multiway_m: outcome.m_used,
        multiway_contractive: outcome.converged,
    })
}

/// The matrices a single-instance mode runs on: each file (preconditioned),
/// or trial 0 rescaled to each radius.
pub fn single_instances(cfg: &ExperimentConfig) -> Result<Vec<(String, SparseMatrix, u64)>> {
    match &cfg.source {
        MatrixSource::Files(files) => files
            .iter()
            .enumerate()
            .map(|(k, path)| Ok((path.display().to_string(), load_preconditioned(path)?, derive_seed(cfg.seed, k as u64))))
            .collect(),
        MatrixSource::Synthetic { n, density } => {
            let trial = SyntheticTrial::generate(*n, *density, cfg.seed, 0)?;
            Ok(cfg
                .radius_list
                .iter()
                .map(|&r| (format!("synthetic n={n} density={density} rho={r}"), trial.rescaled(r), trial.seed))
                .collect())
        }
    }
}

/// Output of one CLI run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv: String,
    pub table: String,
    /// The run completed but produced nothing convergent.
    pub divergent_only: bool,
}

/// Runs `cfg.mode` and renders both the CSV and the human-readable table.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Ratio => {
            let rows = run_ratio_experiment(cfg)?;
            Ok(RunOutput { csv: ratio_csv(&rows), table: render_ratio(&rows), divergent_only: false })
        }
        Mode::Speedup => {
            let out = run_speedup_experiment(cfg)?;
            let divergent_only = out.rows.iter().all(|r| r.mean_speedup.is_none());
            Ok(RunOutput { csv: speedup_csv(&out.rows), table: render_speedup(&out), divergent_only })
        }
        Mode::Diagnose => {
            let reports = single_instances(cfg)?
                .into_iter()
                .map(|(label, h, _)| diagnose_matrix(label, &h, cfg.phi_max))
                .collect::<Result<Vec<_>>>()?;
            let divergent_only = reports.iter().all(|r| !r.solvable());
            Ok(RunOutput { csv: diagnose_csv(&reports, cfg.seed), table: render_diagnose(&reports), divergent_only })
        }
        Mode::Solve => {
            let mut reports = Vec::new();
            for (label, h, seed) in single_instances(cfg)? {
                let (b, hv) = random_vectors(h.n_rows(), seed);
                let problem = ProblemInstance::new(h, b, hv)?;
                let m = cfg.m_list.first().copied();
                reports.push(solve_problem(label, &problem, m, cfg.phi_max, cfg.epsilon, cfg.num_walks, cfg.seed, cfg.tol)?);
            }
            let divergent_only = reports.iter().all(|r| !r.variance.converged);
            Ok(RunOutput { csv: solve_csv(&reports, cfg.seed), table: render_solve(&reports), divergent_only })
        }
        Mode::DivergenceDemo => {
            let mut reports = Vec::new();
            for (label, h, seed) in single_instances(cfg)? {
                let (b, hv) = random_vectors(h.n_rows(), seed);
                let problem = ProblemInstance::new(h, b, hv)?;
                reports.push(run_divergence_demo(label, &problem, cfg)?);
            }
            Ok(RunOutput { csv: demo_csv(&reports), table: render_demo(&reports), divergent_only: false })
        }
    }
}

/// Writes `csv` to `path`, creating parent directories.
pub fn write_csv(path: &Path, csv: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, csv)?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(mode: Mode) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(mode);
        cfg.source = MatrixSource::Synthetic { n: 40, density: 0.3 };
        cfg.trials = 6;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn ratio_rows_are_well_formed_and_monotone() {
        let mut cfg = tiny(Mode::Ratio);
        cfg.radius_list = vec![0.1, 0.9];
        let rows = run_ratio_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 10);
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.solvable_fraction));
            if r.rho == 0.1 {
                assert_eq!(r.solvable_fraction, 1.0);
            }
        }
        for w in rows.windows(2).filter(|w| w[0].rho == w[1].rho) {
            assert!(w[1].solvable_fraction >= w[0].solvable_fraction);
        }
    }

    #[test]
    fn constant_row_sum_trials_are_excluded() {
        let h = SparseMatrix::from_dense(&[vec![0.0, 0.3, 0.3], vec![0.3, 0.0, 0.3], vec![0.3, 0.3, 0.0]]).unwrap();
        assert!(has_constant_row_sums(&h));
        let r = trial_speedups(h, vec![1.0; 3], vec![1.0; 3], &[2, 3], 1e-10);
        assert_eq!(r, Err(Exclusion::ConstantRowSums));
    }

    #[test]
    fn speedup_rows_account_for_every_trial() {
        let mut cfg = tiny(Mode::Speedup);
        cfg.radius_list = vec![0.5];
        cfg.m_list = vec![2, 3];
        let out = run_speedup_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 2);
        for r in &out.rows {
            assert_eq!(r.trials_used + r.trials_excluded, cfg.trials);
            assert!(r.mean_speedup.unwrap() > 0.0);
        }
    }

    #[test]
    fn diagnose_sequence_matches_eta_identity() {
        let h = SparseMatrix::from_dense(&[vec![0.6, 0.6], vec![0.0, 0.5]]).unwrap();
        let d = diagnose_matrix("upper", &h, 10).unwrap();
        let mut eta = vec![1.0, 1.0];
        for (m, &norm) in d.h_tilde_norms.iter().enumerate() {
            eta = h.abs().matvec(&eta).unwrap();
            let top = eta.iter().fold(0.0f64, |a, &v| a.max(v));
            assert!((norm - top * top).abs() <= 1e-14, "m = {}", m + 1);
        }
        assert_eq!(d.first_contractive, Some(d.h_tilde_norms.iter().position(|&v| v < 1.0).unwrap() + 1));
        let small = SparseMatrix::from_dense(&[vec![0.2, 0.3], vec![0.4, 0.1]]).unwrap();
        assert_eq!(diagnose_matrix("small", &small, 5).unwrap().first_contractive, Some(1));
    }

    #[test]
    fn run_is_reproducible() {
        let mut cfg = tiny(Mode::Ratio);
        cfg.radius_list = vec![0.8, 0.9];
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.csv, b.csv);
    }
}
