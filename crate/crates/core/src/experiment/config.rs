use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::transition::DEFAULT_PHI_MAX;
use crate::variance::NEUMANN_TOL;
use crate::walk::DEFAULT_EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Ratio,
    Speedup,
    Diagnose,
    DivergenceDemo,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "solve" => Mode::Solve,
            "ratio" => Mode::Ratio,
            "speedup" => Mode::Speedup,
            "diagnose" => Mode::Diagnose,
            "divergence-demo" => Mode::DivergenceDemo,
            other => {
                return Err(Error::InvalidParameter {
                    name: "mode",
                    reason: format!("`{other}` is not one of solve, ratio, speedup, diagnose, divergence-demo"),
                })
            }
        })
    }
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Ratio => "ratio",
            Mode::Speedup => "speedup",
            Mode::Diagnose => "diagnose",
            Mode::DivergenceDemo => "divergence-demo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSource {
    /// `sprand`-style matrices rescaled to each radius in `radius_list`.
    Synthetic { n: usize, density: f64 },
    /// Matrix Market files, diagonally preconditioned on load.
    Files(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub source: MatrixSource,
    pub m_list: Vec<usize>,
    pub radius_list: Vec<f64>,
    pub trials: usize,
    pub epsilon: f64,
    pub num_walks: usize,
    pub seed: u64,
    pub phi_max: usize,
    /// Relative tolerance of the closed-form variance series.
    pub tol: f64,
    /// Number of partial-sum terms in divergence-demo mode.
    pub budget: usize,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 20_170_101;
pub const DEFAULT_RATIO_RADII: [f64; 7] = [0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 0.99];
pub const DEFAULT_SPEEDUP_RADII: [f64; 4] = [0.80, 0.90, 0.95, 0.99];

impl ExperimentConfig {
    /// Defaults for `mode` at the full synthetic scale (`n = 1000`,
    /// density 0.2, 100 trials).
    pub fn new(mode: Mode) -> Self {
        let (m_list, radius_list) = match mode {
            Mode::Ratio => (vec![1, 2, 3, 4, 5], DEFAULT_RATIO_RADII.to_vec()),
            Mode::Speedup => (vec![2, 3, 4, 5], DEFAULT_SPEEDUP_RADII.to_vec()),
            Mode::Solve | Mode::Diagnose | Mode::DivergenceDemo => (vec![], vec![0.9]),
        };
        Self {
            mode,
            source: MatrixSource::Synthetic { n: 1000, density: 0.2 },
            m_list,
            radius_list,
            trials: 100,
            epsilon: DEFAULT_EPSILON,
            num_walks: 100_000,
            seed: DEFAULT_SEED,
            phi_max: DEFAULT_PHI_MAX,
            tol: NEUMANN_TOL,
            budget: 60,
            out: None,
        }
    }

    /// The CI-sized preset: `n = 200`, 30 trials.
    pub fn small(mut self) -> Self {
        if let MatrixSource::Synthetic { n, .. } = &mut self.source {
            *n = 200;
        }
        self.trials = 30;
        self
    }

    /// Applies one `key=value` setting. Keys match the long CLI flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "mode" => self.mode = value.parse()?,
            "n" => {
                let n = parse("n", value)?;
                *self.synthetic_mut()?.0 = n;
            }
            "density" => {
                let density = parse("density", value)?;
                *self.synthetic_mut()?.1 = density;
            }
            "matrix" => {
                let files = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect();
                self.source = MatrixSource::Files(files);
            }
            "rho" => self.radius_list = parse_list("rho", value)?,
            "m" => self.m_list = parse_list("m", value)?,
            "trials" => self.trials = parse("trials", value)?,
            "walks" => self.num_walks = parse("walks", value)?,
            "epsilon" => self.epsilon = parse("epsilon", value)?,
            "seed" => self.seed = parse("seed", value)?,
            "phi-max" | "phi_max" => self.phi_max = parse("phi-max", value)?,
            "tol" => self.tol = parse("tol", value)?,
            "budget" => self.budget = parse("budget", value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "small" => {
                if parse::<bool>("small", value)? {
                    *self = self.clone().small();
                }
            }
            other => {
                return Err(Error::InvalidParameter { name: "config", reason: format!("unknown key `{other}`") })
            }
        }
        Ok(())
    }

    /// Reads a flat `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_str(&text, path)
    }

    pub fn apply_str(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        if let Some(r) = self.radius_list.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
            if matches!(self.mode, Mode::Ratio | Mode::Speedup) {
                return bad("rho", format!("{r} is outside (0, 1)"));
            }
        }
        if self.m_list.contains(&0) {
            return bad("m", "every m must be at least 1".into());
        }
        if self.mode == Mode::Speedup && self.m_list.contains(&1) {
            return bad("m", "the 1-way baseline is implicit in speedup mode".into());
        }
        if matches!(self.mode, Mode::Ratio | Mode::Speedup) && self.m_list.is_empty() {
            return bad("m", "at least one walk order is required".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", format!("{} must be positive", self.epsilon));
        }
        if self.phi_max == 0 {
            return bad("phi-max", "must be at least 1".into());
        }
        if let MatrixSource::Synthetic { n, density } = self.source {
            if n == 0 || !(density > 0.0 && density <= 1.0) {
                return bad("density", format!("synthetic source needs n ≥ 1 and density in (0,1], got n={n}, density={density}"));
            }
        }
        if let MatrixSource::Files(files) = &self.source {
            if files.is_empty() {
                return bad("matrix", "no files given".into());
            }
            if self.mode == Mode::Ratio {
                return bad("matrix", "ratio experiments need a synthetic source".into());
            }
        }
        Ok(())
    }

    fn synthetic_mut(&mut self) -> Result<(&mut usize, &mut f64)> {
        if let MatrixSource::Files(_) = self.source {
            self.source = MatrixSource::Synthetic { n: 1000, density: 0.2 };
        }
        match &mut self.source {
            MatrixSource::Synthetic { n, density } => Ok((n, density)),
            MatrixSource::Files(_) => unreachable!(),
        }
    }
}

fn parse<T: FromStr>(name: &'static str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Error::InvalidParameter { name, reason: format!("`{value}`: {e}") })
}

fn parse_list<T: FromStr>(name: &'static str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(name, s)).collect()
}
