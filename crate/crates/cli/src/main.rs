use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use multiway_mc::experiment::{self, ExperimentConfig, Mode};
use multiway_mc::Error;

/// Multi-way Monte Carlo experiments.
///
/// Settings are resolved in order: mode defaults, then `--config`, then
/// `--small`, then explicit flags. The CSV goes to `--out` (or stdout), the
/// readable summary to stderr when the CSV occupies stdout.
#[derive(Debug, Parser)]
#[command(name = "mwmc", version)]
struct Cli {
    /// solve, ratio, speedup, diagnose or divergence-demo.
    #[arg(long)]
    mode: Option<String>,
    /// Flat `key = value` file using the flag names as keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CI-sized preset: n = 200, 30 trials.
    #[arg(long)]
    small: bool,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    density: Option<String>,
    /// Comma-separated Matrix Market files (preconditioned on load).
    #[arg(long)]
    matrix: Option<String>,
    /// Comma-separated target spectral radii.
    #[arg(long)]
    rho: Option<String>,
    /// Comma-separated walk orders.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    walks: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "phi-max")]
    phi_max: Option<String>,
    /// Relative tolerance of the closed-form variance series.
    #[arg(long)]
    tol: Option<String>,
    /// Partial-sum terms in divergence-demo mode.
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        let pairs = [
            ("n", &self.n),
            ("density", &self.density),
            ("matrix", &self.matrix),
            ("rho", &self.rho),
            ("m", &self.m),
            ("trials", &self.trials),
            ("walks", &self.walks),
            ("epsilon", &self.epsilon),
            ("seed", &self.seed),
            ("phi-max", &self.phi_max),
            ("tol", &self.tol),
            ("budget", &self.budget),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_deref().map(|v| (k, v))).collect()
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let file_text = match &cli.config {
        Some(path) => Some(std::fs::read_to_string(path)?),
        None => None,
    };
    // The mode picks the defaults, so find it before applying anything else.
    let file_mode = file_text.as_deref().and_then(|text| {
        text.lines()
            .filter_map(|l| l.split('#').next()?.split_once('='))
            .find(|(k, _)| k.trim() == "mode")
            .map(|(_, v)| v.trim().to_string())
    });
    let mode: Mode = match cli.mode.as_deref().or(file_mode.as_deref()) {
        Some(m) => m.parse()?,
        None => Mode::Solve,
    };
    let mut cfg = ExperimentConfig::new(mode);
    if let (Some(text), Some(path)) = (&file_text, &cli.config) {
        cfg.apply_str(text, path)?;
        cfg.mode = mode;
    }
    if cli.small {
        cfg = cfg.small();
    }
    for (key, value) in cli.overrides() {
        cfg.set(key, value)?;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("mwmc: {e}");
            return ExitCode::from(1);
        }
    };
    let output = match experiment::run(&cfg) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("mwmc: {e}");
            return ExitCode::from(1);
        }
    };
    match &cfg.out {
        Some(path) => {
            if let Err(e) = experiment::write_csv(path, &output.csv) {
                eprintln!("mwmc: writing {}: {e}", path.display());
                return ExitCode::from(1);
            }
            print!("{}", output.table);
        }
        None => {
            eprint!("{}", output.table);
            print!("{}", output.csv);
        }
    }
    if output.divergent_only {
        eprintln!("mwmc: every result diverged");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
