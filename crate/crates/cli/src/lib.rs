//! Config-driven experiments over the `morrey-core` toolkit: every run
//! writes a deterministic `report.json` (versions, config hash, each numeric
//! result with its tolerance) and CSV tables.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::PathBuf;

pub use config::{ExperimentConfig, Exponents, Kind};
pub use experiments::{execute, threshold_scan, ThresholdScan};
pub use report::{Check, Outcome, Report, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] morrey_core::Error),
}

impl CliError {
    /// 2 for usage and configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use morrey_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(E::Config(_) | E::Assumption(_) | E::Misaligned(_) | E::Io(_)) => 2,
            CliError::Core(_) | CliError::Numerical(_) => 3,
        }
    }
}

/// Runs the experiment and writes its report into `cfg.output_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<(Report, PathBuf), CliError> {
    let (e, outcome) = execute(cfg)?;
    let report = Report::new(cfg, e, &outcome);
    let path = report::write(&cfg.output_dir, &report, &outcome)?;
    Ok((report, path))
}
