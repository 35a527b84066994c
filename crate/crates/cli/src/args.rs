use std::path::PathBuf;
use std::time::Duration;

use clap::{ArgGroup, Parser, ValueEnum};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Madmm,
    Proxlinear,
    Compare,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Madmm => "madmm",
            Mode::Proxlinear => "proxlinear",
            Mode::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Diagnostics {
    Off,
    Decrease,
    Full,
}

/// Solve l1-regularized logistic regression with a quadratic classifier by
/// mADMM and/or prox-linear; write CSV traces and a JSON summary.
#[derive(Debug, Parser)]
#[command(name = "madmm", version)]
#[command(group(ArgGroup::new("source").required(true).args(["data", "synthetic"])))]
pub struct Args {
    #[arg(long, value_enum, default_value = "compare")]
    pub mode: Mode,

    /// LIBSVM file.
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Synthetic data of size DxQ, e.g. 1000x100.
    #[arg(long, value_name = "DxQ", value_parser = parse_size)]
    pub synthetic: Option<(usize, usize)>,

    #[arg(long, default_value_t = 0.001)]
    pub lambda1: f64,

    /// Defaults to 0.1 for synthetic data and 0.001 for files.
    #[arg(long)]
    pub lambda2: Option<f64>,

    /// Defaults to 2.5 / q.
    #[arg(long)]
    pub beta: Option<f64>,

    #[arg(long, default_value_t = madmm::madmm::DEFAULT_DELTA_TILDE)]
    pub delta_tilde: f64,

    /// Seeds both the synthetic data and the initial point.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Wall-clock budget in seconds per solver. Defaults by problem size
    /// for the standard benchmark sizes.
    #[arg(long)]
    pub budget: Option<f64>,

    /// Outer iteration limit per solver.
    #[arg(long)]
    pub max_iters: Option<usize>,

    /// Stop mADMM once every residual is at most EPS (solve mode).
    #[arg(long, value_name = "EPS", num_args = 0..=1, default_missing_value = "1e-5")]
    pub solve: Option<f64>,

    /// Trace CSV path. In compare mode the solver name is inserted before
    /// the extension.
    #[arg(long)]
    pub trace: Option<PathBuf>,

    /// JSON summary path; printed to stdout when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,

    /// Enforce the beta condition and fail on any diagnostic violation.
    #[arg(long)]
    pub strict: bool,

    /// Run the two solvers of compare mode concurrently.
    #[arg(long)]
    pub parallel: bool,

    /// Scale of the x1 relative-smoothness constant.
    #[arg(long, default_value_t = madmm::surrogates::DEFAULT_BREGMAN_KAPPA)]
    pub kappa1: f64,

    /// Inequality monitoring; `full` when --strict is given.
    #[arg(long, value_enum, default_value = "off")]
    pub diagnostics: Diagnostics,

    /// Record every iteration instead of sampling by elapsed time.
    #[arg(long)]
    pub every_iteration: bool,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (d, q) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected DxQ, got {s:?}"))?;
    let d: usize = d.trim().parse().map_err(|_| format!("bad dimension {d:?}"))?;
    let q: usize = q.trim().parse().map_err(|_| format!("bad sample count {q:?}"))?;
    if d == 0 || q == 0 {
        return Err("dimensions must be positive".into());
    }
    Ok((d, q))
}

/// Budgets of the standard benchmark sizes, in seconds.
const DEFAULT_BUDGETS: &[((usize, usize), f64)] = &[
    ((1000, 100), 15.0),
    ((5000, 1000), 100.0),
    ((10000, 2000), 300.0),
    ((10000, 5000), 300.0),
    ((7129, 44), 30.0),
    ((7129, 38), 30.0),
    ((2000, 62), 30.0),
];

pub fn default_budget(d: usize, q: usize) -> Option<f64> {
    DEFAULT_BUDGETS
        .iter()
        .find(|(size, _)| *size == (d, q))
        .map(|(_, b)| *b)
}

impl Args {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.lambda1 >= 0.0) || self.lambda2.is_some_and(|l| !(l >= 0.0)) {
            return Err(CliError::Config("lambda1 and lambda2 must be nonnegative".into()));
        }
        if self.budget.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
            return Err(CliError::Config("budget must be positive".into()));
        }
        if self.max_iters == Some(0) {
            return Err(CliError::Config("max-iters must be positive".into()));
        }
        if self.solve.is_some_and(|e| !(e > 0.0)) {
            return Err(CliError::Config("solve tolerance must be positive".into()));
        }
        if !(self.kappa1 >= 1.0) {
            return Err(CliError::Config("kappa1 must be >= 1".into()));
        }
        Ok(())
    }

    pub fn lambda2_for(&self, synthetic: bool) -> f64 {
        self.lambda2.unwrap_or(if synthetic { 0.1 } else { 0.001 })
    }

    /// Explicit budget, else the size default unless an iteration limit is
    /// given.
    pub fn resolve_budget(&self, d: usize, q: usize) -> Result<Option<Duration>, CliError> {
        if let Some(b) = self.budget {
            return Ok(Some(Duration::from_secs_f64(b)));
        }
        if self.max_iters.is_some() {
            return Ok(None);
        }
        default_budget(d, q)
            .map(|b| Some(Duration::from_secs_f64(b)))
            .ok_or_else(|| {
                CliError::Config(format!(
                    "no default budget for size {d}x{q}; pass --budget or --max-iters"
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sizes() {
        assert_eq!(parse_size("1000x100"), Ok((1000, 100)));
        assert_eq!(parse_size("10X5"), Ok((10, 5)));
        assert!(parse_size("10").is_err());
        assert!(parse_size("0x5").is_err());
    }

    #[test]
    fn budget_defaults() {
        assert_eq!(default_budget(1000, 100), Some(15.0));
        assert_eq!(default_budget(10000, 5000), Some(300.0));
        assert_eq!(default_budget(10, 5), None);
    }

    #[test]
    fn source_is_required_and_exclusive() {
        assert!(Args::try_parse_from(["madmm"]).is_err());
        assert!(Args::try_parse_from(["madmm", "--synthetic", "3x2", "--data", "f"]).is_err());
        let a = Args::try_parse_from(["madmm", "--synthetic", "3x2", "--solve"]).unwrap();
        assert_eq!(a.solve, Some(1e-5));
    }
}
