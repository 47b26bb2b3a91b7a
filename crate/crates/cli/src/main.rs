use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use padicnet::turing::Space;

mod commands;
mod config;
mod error;

use commands::{OperatorChoice, Output};
use config::{ModelKind, Overrides, RunConfig};
use error::CliResult;

/// p-adic reaction-diffusion models on networks.
#[derive(Debug, Parser)]
#[command(name = "padicnet", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Edge list, JSON graph document, or complete:n / path:n / cycle:n.
    #[arg(long, global = true)]
    graph: Option<String>,
    #[arg(long, global = true)]
    p: Option<u32>,
    /// Level of the vertex codes.
    #[arg(long = "N", global = true)]
    level: Option<usize>,
    /// Comma-separated list of refinement levels.
    #[arg(long = "M", global = true, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long, global = true, value_enum)]
    model: Option<ModelKind>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Diffusion ratio of the second species.
    #[arg(long, global = true)]
    d: Option<f64>,
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Vertex codes and degrees.
    Embed,
    /// Write one operator matrix.
    Operator {
        #[arg(long, value_enum, default_value = "full")]
        kind: OperatorChoice,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Predicted and computed spectra.
    Spectrum {
        /// A level, or `infinity` for the continuum operator.
        #[arg(long)]
        space: Option<Space>,
    },
    /// Turing conditions and per-space verdicts.
    Turing,
    /// Integrate the reaction-diffusion system and analyse the pattern.
    Simulate,
    /// Gap table across refinement levels.
    Converge,
    /// Compare the level-M operator with its block replica.
    Replica,
}

fn run(cli: Cli) -> CliResult<()> {
    let c = cli.common;
    let file = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = file.merge(Overrides {
        graph: c.graph,
        p: c.p,
        level: c.level,
        levels: c.levels,
        model: c.model,
        eps: c.eps,
        d: c.d,
        seed: c.seed,
        out: c.out,
    })?;
    let out = Output::new(cfg.out.clone())?;
    match cli.command {
        Command::Embed => commands::embed(&cfg, &out),
        Command::Operator { kind, lambda } => commands::operator(&cfg, &out, kind, lambda),
        Command::Spectrum { space } => commands::spectrum(&cfg, &out, space),
        Command::Turing => commands::turing(&cfg, &out),
        Command::Simulate => commands::simulate_cmd(&cfg, &out),
        Command::Converge => commands::converge(&cfg, &out),
        Command::Replica => commands::replica(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
