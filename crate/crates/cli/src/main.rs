use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jumplab::{cmd_rates, cmd_simulate, cmd_zeno, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "jumplab", version, about = "Quantum jump rates and measured trajectory ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic jump-rate generator, stationary law and mechanism report.
    Rates {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Trajectory ensemble with jump statistics.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Dwell times and rates over a list of measurement strengths.
    Zeno {
        #[arg(short, long)]
        config: PathBuf,
        /// Comma-separated measurement strengths, e.g. 2,5,10.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        gammas: Vec<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Rates { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_rates(&cfg)?;
        }
        Command::Simulate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_simulate(&cfg)?;
        }
        Command::Zeno { config, gammas } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_zeno(&cfg, &gammas)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
