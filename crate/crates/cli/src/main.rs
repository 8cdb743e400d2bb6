use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

mod commands;
mod config;
mod output;

use commands::*;
use output::{Format, Sink};

/// Thermodynamic bookkeeping for asymptotic inference.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on usage,
/// input or domain errors.
#[derive(Debug, Parser)]
#[command(name = "infotherm", version)]
struct Cli {
    /// JSON config; keys mirror the long flags (underscored), optionally
    /// nested under the subcommand name. Flags win.
    #[arg(long, global = true)]
    config: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file (default stdout).
    #[arg(long, short, global = true)]
    output: Option<String>,
    /// Report entropies and information in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
    /// Also write a whitespace-separated table for plotting.
    #[arg(long, global = true)]
    plot_data: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Point quantities at a state (m, σ²).
    State(StateArgs),
    /// Work, information, flux and first-law residual along a path.
    Path(PathArgs),
    /// Closure of exact differentials and loop quantities of a cycle.
    Cycle(CycleArgs),
    /// Optimal variance trajectory for a sampling-work budget.
    Optimize(OptimizeArgs),
    /// Driven (μ, m) loop simulation and the cyclic information check.
    #[command(name = "secondlaw")]
    SecondLaw(SecondLawArgs),
    /// Adaptation responses, fixed points and triple-corpus verification.
    Adapt(AdaptArgs),
    /// Monte Carlo validation of the entropy and variance formulas.
    Validate(ValidateArgs),
    /// Generate a synthetic adaptation-triple corpus (CSV).
    Corpus(CorpusArgs),
}

fn with_config<A: Serialize + DeserializeOwned>(
    flags: &A,
    cfg: Option<&str>,
    name: &str,
) -> Result<A> {
    config::merge(flags, config::load_config(cfg, name)?, name)
}

fn run(cli: &Cli) -> Result<bool> {
    let sink = Sink {
        format: cli.format,
        output: cli.output.clone(),
        bits: cli.bits,
        plot_data: cli.plot_data.clone(),
    };
    let cfg = cli.config.as_deref();
    match &cli.command {
        Command::State(a) => state(&with_config(a, cfg, "state")?, &sink),
        Command::Path(a) => path(&with_config(a, cfg, "path")?, &sink),
        Command::Cycle(a) => cycle(&with_config(a, cfg, "cycle")?, &sink),
        Command::Optimize(a) => optimize(&with_config(a, cfg, "optimize")?, &sink),
        Command::SecondLaw(a) => second_law(&with_config(a, cfg, "secondlaw")?, &sink),
        Command::Adapt(a) => adapt(&with_config(a, cfg, "adapt")?, &sink),
        Command::Validate(a) => validate(&with_config(a, cfg, "validate")?, &sink),
        Command::Corpus(a) => corpus(&with_config(a, cfg, "corpus")?, &sink),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("infotherm: one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
