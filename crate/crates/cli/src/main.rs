//! `vinerisk`: fit annual vine-copula regressions on gridded panel data and
//! derive frost, drought and compound risk surfaces from them.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use commands::{CliError, CliResult};
use config::{CommonArgs, GridSize, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "vinerisk", version, about = "Vine-copula risk analysis of gridded panel data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit per-year D-vine and Y-vine models and write order analytics.
    Fit(FitArgs),
    /// Evaluate frost, drought and joint risk surfaces from fitted models.
    Risk(RiskArgs),
    /// Survival curves and return periods from yearly risk surfaces.
    Survival(SurvivalArgs),
    /// Generate a synthetic panel from a known Y-vine.
    Simulate(SimulateArgs),
    /// Pairwise Kendall's tau per year.
    Eda(EdaArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct RiskArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory of fitted model sets [default: <out>/models].
    #[arg(long, value_name = "DIR")]
    models: Option<PathBuf>,
    /// Directory for the risk surfaces [default: <out>/surfaces].
    #[arg(long, value_name = "DIR")]
    surfaces: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SurvivalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory of risk surfaces [default: <out>/surfaces].
    #[arg(long, value_name = "DIR")]
    surfaces: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Grid size `NXxNY` [default: 10x10].
    #[arg(long, value_name = "NXxNY")]
    grid: Option<GridSize>,
}

#[derive(Debug, Args)]
struct EdaArgs {
    #[command(flatten)]
    common: CommonArgs,
}

fn run(cli: Cli) -> CliResult<()> {
    let (cfg, cmd): (RunConfig, fn(&RunConfig) -> CliResult<()>) = match cli.command {
        Command::Fit(a) => (
            RunConfig::resolve("fit", &a.common, None, None, None).map_err(CliError::Usage)?,
            commands::cmd_fit,
        ),
        Command::Risk(a) => (
            RunConfig::resolve("risk", &a.common, a.models, a.surfaces, None).map_err(CliError::Usage)?,
            commands::cmd_risk,
        ),
        Command::Survival(a) => (
            RunConfig::resolve("survival", &a.common, None, a.surfaces, None).map_err(CliError::Usage)?,
            commands::cmd_survival,
        ),
        Command::Simulate(a) => (
            RunConfig::resolve("simulate", &a.common, None, None, a.grid).map_err(CliError::Usage)?,
            commands::cmd_simulate,
        ),
        Command::Eda(a) => (
            RunConfig::resolve("eda", &a.common, None, None, None).map_err(CliError::Usage)?,
            commands::cmd_eda,
        ),
    };
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?;
    }
    commands::echo_config(&cfg)?;
    cmd(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
