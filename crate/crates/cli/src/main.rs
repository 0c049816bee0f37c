mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};

use config::{Command, Overrides, RunConfig, StrategyArg};
use error::CliError;

/// Rosenblatt-transform GAN experiments.
#[derive(Debug, Parser)]
#[command(name = "rosegan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Args)]
struct Flags {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the antiderivative form of the entropy integral.
    #[arg(long, global = true)]
    exact_integral: bool,
    #[arg(long, global = true, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
}

fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    let mut cfg = match &cli.flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.flags.seed,
        out: cli.flags.out.clone(),
        exact_integral: cli.flags.exact_integral,
        strategy: cli.flags.strategy,
        delta: cli.flags.delta,
        beta: cli.flags.beta,
    });
    cfg.validate(cli.command)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.flags.threads {
        if t == 0 {
            return Err(CliError::ConfigInvalid("`--threads` must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    pool.install(|| run::run(cli.command, &cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
