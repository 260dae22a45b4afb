//! `bcmtor`: configuration-driven front end for the boundary-control wave
//! lab. Subcommands: forward | pipeline | stability | lemmas.
//!
//! Exit codes: 0 success, 1 numerical/suite failure, 2 config error.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CmdError, CmdOptions};

#[derive(Parser)]
#[command(name = "bcmtor", about = "Boundary-control wave lab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the forward wave system and write the snapshot and trace.
    Forward(RunArgs),
    /// Synthesize response data and run the full reconstruction chain.
    Pipeline(RunArgs),
    /// Run the potential-perturbation stability experiment.
    Stability(RunArgs),
    /// Run the operator-theoretic random-matrix suites.
    Lemmas(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overridden by BCMTOR_OUT, overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for probe sets and suites.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for data-parallel assembly; 0 = automatic.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Also emit SVG line plots where the command supports them.
    #[arg(long)]
    svg: bool,
}

fn resolve(args: &RunArgs) -> Result<(config::RunConfig, CmdOptions), CmdError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        CmdError::Validation(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let cfg = config::parse(&text)
        .map_err(|e| CmdError::Validation(format!("{}: {e}", args.config.display())))?;
    let out = std::env::var_os("BCMTOR_OUT")
        .map(PathBuf::from)
        .or_else(|| args.out.clone())
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = args.seed.unwrap_or(cfg.seed);
    if args.threads > 0 {
        // ignore the error when a pool is already installed (repeat calls)
        let _ = rayon_pool(args.threads);
    }
    Ok((cfg, CmdOptions { out, seed, svg: args.svg }))
}

fn rayon_pool(n: usize) -> Result<(), String> {
    bcmtor::build_thread_pool(n).map_err(|e| e.to_string())
}

fn run() -> Result<(), CmdError> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Forward(a) => {
            let (cfg, opts) = resolve(a)?;
            commands::cmd_forward(&cfg, &opts)
        }
        Cmd::Pipeline(a) => {
            let (cfg, opts) = resolve(a)?;
            commands::cmd_pipeline(&cfg, &opts)
        }
        Cmd::Stability(a) => {
            let (cfg, opts) = resolve(a)?;
            commands::cmd_stability(&cfg, &opts)
        }
        Cmd::Lemmas(a) => {
            let (cfg, opts) = resolve(a)?;
            commands::cmd_lemmas(&cfg, &opts)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CmdError::Validation(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
