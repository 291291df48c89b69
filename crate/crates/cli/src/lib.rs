//! Config-driven runner for the built-in and inline scenarios.
//!
//! Exit codes: 0 success, 2 config error, 3 runtime failure, 4 certification
//! failure (with `--require-stable`) or failed validation.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_run, cmd_sweep, cmd_validate, Options, RunOutcome, Validation};
pub use config::{parse_config, parse_real, Certification, Real, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "nhstab", version, about = "Stabilize nonholonomic systems with oscillating bracket feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Built-in scenario; same as `--set scenario=NAME`.
    #[arg(long, short)]
    pub scenario: Option<String>,
    /// Override a config key, e.g. `--set epsilon=0.05` or `--set output.svg=plot.svg`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, short, default_value = ".")]
    pub output_dir: PathBuf,
    /// Exit with status 4 when the certificate fails.
    #[arg(long)]
    pub require_stable: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate, certify and write the trajectory, report and plot.
    Run(Common),
    /// Check the rank condition, multipliers and drift declarations.
    Validate(Common),
    /// Run a grid over epsilon and gamma in parallel.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated periods.
        #[arg(long, value_delimiter = ',', value_parser = parse_real)]
        epsilon: Vec<f64>,
        /// Comma-separated gains.
        #[arg(long, value_delimiter = ',', value_parser = parse_real)]
        gamma: Vec<f64>,
    },
    /// Print the full config of a built-in scenario.
    Show { scenario: String },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut overrides = Vec::new();
    if let Some(name) = &common.scenario {
        overrides.push(format!("scenario=\"{name}\""));
    }
    overrides.extend(common.overrides.iter().cloned());
    parse_config(&text, &overrides)
}

fn options(common: &Common) -> Options {
    Options { output_dir: common.output_dir.clone(), require_stable: common.require_stable }
}

/// Executes a parsed command and returns the process exit code.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match cli.command {
        Command::Run(c) => load(&c).and_then(|cfg| cmd_run(&cfg, &options(&c), out).map(drop)),
        Command::Validate(c) => load(&c).and_then(|cfg| cmd_validate(&cfg, out).map(drop)),
        Command::Sweep { common, epsilon, gamma } => {
            load(&common).and_then(|cfg| cmd_sweep(&cfg, &epsilon, &gamma, &options(&common), out).map(drop))
        }
        Command::Show { scenario } => match nhstab_core::systems::by_name(&scenario) {
            Some(s) => {
                let _ = write!(out, "{}", RunConfig::from_scenario(&s).to_toml());
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown scenario `{scenario}`"))),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
