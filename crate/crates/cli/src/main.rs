//! `natcap`: valuation, optimization, simulation, and resilience reports
//! for ecosystems whose biodiversity stabilizes the income they generate.
//!
//! Every command reads one scenario JSON file, prints one report to stdout,
//! and is deterministic given its flags: the stochastic commands derive all
//! randomness from `--seed`, independent of thread count. Exit codes: 0 on
//! success, 1 for invalid input, 2 for numerical failure.

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{CommandKind, GridSpec, RunManifest};
use output::Format;

#[derive(Parser)]
#[command(
    name = "natcap",
    version,
    about = "Valuation toolkit for biodiversity as natural insurance capital"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Random seed for the stochastic commands.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report encoding.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Valuation table over a grid of biodiversity levels.
    Value {
        #[command(flatten)]
        common: CommonArgs,
        /// Grid as lo:hi:steps; defaults to the scenario bounds with 101
        /// points.
        #[arg(long)]
        grid: Option<GridSpec>,
    },
    /// Optimal biodiversity without insurance and jointly with coverage.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        /// Market load; repeat for several. Defaults to the scenario's
        /// market section.
        #[arg(long)]
        lambda: Vec<f64>,
    },
    /// Monte Carlo simulation of the scenario's credit buffer pool.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of simulated trials.
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Override the buffer section's horizon.
        #[arg(long)]
        horizon: Option<u32>,
        /// Also write per-period trajectories to this CSV file.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Side-by-side resilience-value components.
    Resilience {
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl Cli {
    fn into_manifest(self) -> RunManifest {
        let (kind, common, grid, lambdas, trials, horizon, trajectories) = match self.command {
            Command::Value { common, grid } => {
                (CommandKind::Value, common, grid, Vec::new(), 0, None, None)
            }
            Command::Optimize { common, lambda } => {
                (CommandKind::Optimize, common, None, lambda, 0, None, None)
            }
            Command::Simulate {
                common,
                trials,
                horizon,
                trajectories,
            } => (
                CommandKind::Simulate,
                common,
                None,
                Vec::new(),
                trials,
                horizon,
                trajectories,
            ),
            Command::Resilience { common } => (
                CommandKind::Resilience,
                common,
                None,
                Vec::new(),
                0,
                None,
                None,
            ),
        };
        RunManifest {
            command: kind,
            scenario_path: common.scenario,
            seed: common.seed,
            output_format: common.format,
            grid,
            lambdas,
            trials,
            horizon,
            trajectories,
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is an
            // invalid invocation and shares the validation exit code.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match commands::run(&cli.into_manifest()) {
        Ok(report) => print!("{report}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
