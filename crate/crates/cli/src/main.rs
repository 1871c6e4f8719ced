use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use commands::CliError;

/// Resistance-degradation SCM: generate data, fit, and answer causal queries.
#[derive(Parser)]
#[command(name = "relscm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DrawsInput {
    /// Posterior draws CSV written by `fit` (its `.json` provenance must sit next to it).
    #[arg(long)]
    draws: PathBuf,
    /// Run even if the draws fail the convergence thresholds.
    #[arg(long)]
    allow_unconverged: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset from a generator spec.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample the posterior given a dataset.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Draws CSV; provenance and diagnostics are written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        allow_unconverged: bool,
    },
    /// R-hat and effective sample size of every parameter.
    Diagnose {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        allow_unconverged: bool,
    },
    /// Posterior mean, sd and HDI of every parameter.
    Summarize {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Expected increase or contrast over a grid of times.
    Estimand {
        #[command(flatten)]
        input: DrawsInput,
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reliability curve of an assembly.
    Reliability {
        #[command(flatten)]
        input: DrawsInput,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predictive failure time under an intervention on the assembly.
    PredictFailure {
        #[command(flatten)]
        input: DrawsInput,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Counterfactual outcome or failure time of an observed device.
    Counterfactual {
        #[command(flatten)]
        input: DrawsInput,
        #[arg(long)]
        config: PathBuf,
        /// Dataset holding the device named in the query.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// CSV grids for plotting trajectories and posterior curves.
    PlotData {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        draws: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allow_unconverged: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, out, seed } => commands::generate(&config, &out, seed),
        Command::Fit {
            data,
            config,
            out,
            seed,
            allow_unconverged,
        } => commands::fit(&data, config.as_deref(), &out, seed, allow_unconverged),
        Command::Diagnose {
            draws,
            out,
            allow_unconverged,
        } => commands::diagnose(&draws, out.as_deref(), allow_unconverged),
        Command::Summarize { draws, out, level } => commands::summarize(&draws, &out, level),
        Command::Estimand { input, config, out } => {
            let draws = commands::load_checked(&input.draws, input.allow_unconverged)?;
            commands::estimand(&draws, &config, &out)
        }
        Command::Reliability { input, config, out } => {
            let draws = commands::load_checked(&input.draws, input.allow_unconverged)?;
            commands::reliability(&draws, &config, &out)
        }
        Command::PredictFailure {
            input,
            config,
            out,
            seed,
        } => {
            let draws = commands::load_checked(&input.draws, input.allow_unconverged)?;
            commands::predict_failure(&draws, &config, &out, seed)
        }
        Command::Counterfactual {
            input,
            config,
            data,
            out,
        } => {
            let draws = commands::load_checked(&input.draws, input.allow_unconverged)?;
            commands::counterfactual(&draws, &config, data.as_deref(), &out)
        }
        Command::PlotData {
            data,
            draws,
            config,
            out,
            allow_unconverged,
        } => commands::plot_data(
            data.as_deref(),
            draws.as_deref(),
            config.as_deref(),
            &out,
            allow_unconverged,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
