//! Batch driver: scenario configs and presets in, `report.json` / `profiles.csv` /
//! `kernels.bin` out.
//!
//! Exit status: 0 when every check passes, 1 on an invariant failure (including numerical
//! errors raised by the core), 2 on usage or config errors.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod presets;
pub mod report;

use std::time::{SystemTime, UNIX_EPOCH};

pub use config::ScenarioConfig;
pub use error::CliError;
pub use pipeline::{Scenario, SweepAxis};
pub use report::{CheckResult, Report};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subcommand {
    Validate,
    Construct,
    Evolve,
    Feynman,
    Microlocal,
    Sweep { axis: SweepAxis, values: Vec<usize> },
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Validate => "validate",
            Subcommand::Construct => "construct",
            Subcommand::Evolve => "evolve",
            Subcommand::Feynman => "feynman",
            Subcommand::Microlocal => "microlocal",
            Subcommand::Sweep { .. } => "sweep",
        }
    }
}

/// Runs the pipeline without touching the filesystem.
pub fn run(sub: &Subcommand, cfg: &ScenarioConfig) -> Result<Report, CliError> {
    if let Subcommand::Sweep { axis, values } = sub {
        return pipeline::sweep(cfg, *axis, values);
    }
    let s = Scenario::new(cfg)?;
    match sub {
        Subcommand::Validate => pipeline::validate(&s),
        Subcommand::Construct => pipeline::construct(&s),
        Subcommand::Evolve => pipeline::evolve(&s),
        Subcommand::Feynman => pipeline::feynman(&s),
        Subcommand::Microlocal => pipeline::microlocal(&s),
        Subcommand::Sweep { .. } => unreachable!(),
    }
}

pub fn unix_timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Runs and writes the report files into `cfg.out_dir`; returns the exit status.
///
/// Numerical failures still produce a `report.json` naming the failed invariant.
pub fn run_to_dir(sub: &Subcommand, cfg: &ScenarioConfig, timestamp: u64) -> Result<(Report, i32), CliError> {
    match run(sub, cfg) {
        Ok(report) => {
            report.write(&cfg.out_dir, cfg, timestamp)?;
            let code = if report.passed() { 0 } else { 1 };
            Ok((report, code))
        }
        Err(CliError::Numerical(e)) => {
            let mut report = Report::new(sub.name());
            let (name, value) = match &e {
                hadamard::Error::Construction { invariant, residual } => (invariant.clone(), *residual),
                other => (format!("{other:?}").split([' ', '(', '{']).next().unwrap_or("error").to_owned(), f64::NAN),
            };
            report.insert("error", serde_json::json!(e.to_string()));
            report.push(CheckResult::at_most(name, value, 0.0).note("pipeline aborted"));
            report.write(&cfg.out_dir, cfg, timestamp)?;
            Err(CliError::Numerical(e))
        }
        Err(e) => Err(e),
    }
}
