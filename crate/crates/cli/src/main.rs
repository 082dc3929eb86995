use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSub, ValueEnum};
use hadamard_cli::{presets, run_to_dir, unix_timestamp, CliError, ScenarioConfig, Subcommand, SweepAxis};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "hadamard", version, about = "Construct and verify adiabatic Hadamard states on I x S^1")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSub)]
enum Command {
    /// Invariant suites (Clifford, frames, Hamiltonian, oracles, stencil orders)
    Validate(Common),
    /// Adiabatic state with CAR residuals and defect profiles
    Construct(Common),
    /// Cauchy evolution: unitarity, Richardson ratio, Sobolev norms, optional kernel dump
    Evolve(Common),
    /// Feynman kernel jump and identities
    Feynman(Common),
    /// Wrong-frequency leakage and intertwining defects
    Microlocal(Common),
    /// Slope tables over cutoffs or correction orders
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        over: Axis,
        /// Comma-separated values of the swept parameter
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    K,
    R,
}

#[derive(Args)]
struct Common {
    /// Scenario config (JSON)
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Named preset: flat-massive, breathing, conformal
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    cutoff_k: Option<u64>,
    #[arg(long)]
    correction_order: Option<u64>,
    #[arg(long)]
    time_steps: Option<u64>,
    #[arg(long)]
    space_points: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated check names (replaces the config's list)
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
}

impl Common {
    fn config(&self) -> Result<ScenarioConfig, CliError> {
        let cwd = std::env::current_dir()?;
        let (mut value, base): (Value, PathBuf) = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                let v = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config { pointer: String::new(), message: format!("invalid JSON at line {} column {}: {e}", e.line(), e.column()) })?;
                (v, path.parent().map(Path::to_path_buf).unwrap_or_else(|| cwd.clone()))
            }
            (None, Some(name)) => (presets::value(name)?, cwd.clone()),
            (None, None) => return Err(CliError::Usage("either --config or --preset is required".into())),
        };
        if let Some(obj) = value.as_object_mut() {
            let mut set = |k: &str, v: Value| {
                obj.insert(k.into(), v);
            };
            if let Some(v) = self.cutoff_k {
                set("cutoff_k", json!(v));
            }
            if let Some(v) = self.correction_order {
                set("correction_order", json!(v));
            }
            if let Some(v) = self.time_steps {
                set("time_steps", json!(v));
            }
            if let Some(v) = self.space_points {
                set("space_points", json!(v));
            }
            if let Some(v) = self.seed {
                set("seed", json!(v));
            }
            if let Some(v) = &self.checks {
                set("checks", json!(v));
            }
            if let Some(d) = &self.out_dir {
                set("out_dir", json!(cwd.join(d)));
            }
        }
        ScenarioConfig::from_value(&value, &base)
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let (sub, common) = match cli.command {
        Command::Validate(c) => (Subcommand::Validate, c),
        Command::Construct(c) => (Subcommand::Construct, c),
        Command::Evolve(c) => (Subcommand::Evolve, c),
        Command::Feynman(c) => (Subcommand::Feynman, c),
        Command::Microlocal(c) => (Subcommand::Microlocal, c),
        Command::Sweep { common, over, values } => {
            let axis = match over {
                Axis::K => SweepAxis::Cutoff,
                Axis::R => SweepAxis::Order,
            };
            (Subcommand::Sweep { axis, values }, common)
        }
    };
    let cfg = common.config()?;
    let (report, code) = run_to_dir(&sub, &cfg, unix_timestamp())?;
    for c in &report.checks {
        println!("{} {} = {:e} (tolerance {:e})", if c.passed { "pass" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    for (name, why) in &report.skipped {
        println!("skip {name}: {why}");
    }
    println!("report: {}", cfg.out_dir.join("report.json").display());
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
