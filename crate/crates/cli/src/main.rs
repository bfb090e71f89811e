use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kirchhoff_core::config::{parse_config, RunConfig};
use kirchhoff_core::report::{run_bifurcation, run_solve, run_verify, RunError};

/// Solver and bifurcation analyzer for the negative-modulus Kirchhoff problem
/// -(a - b |grad u|^2) Lap u = mu f with zero boundary values.
#[derive(Debug, Parser)]
#[command(name = "kirchhoff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enumerate every solution for a single mu and write solution.txt.
    Solve(Args),
    /// Sweep a mu range and write bifurcation.csv.
    Bifurcate(Args),
    /// Run the invariant checks and write verify.txt.
    Verify(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    /// Path to a key = value configuration file.
    config: PathBuf,

    /// Output directory, overriding `out_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &Args) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| format!("{}: {e}", args.config.display()))?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(args: &Args, verb: fn(&RunConfig) -> Result<PathBuf, RunError>) -> ExitCode {
    let cfg = match load(args) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    match verb(&cfg) {
        Ok(path) => {
            println!("wrote {}", display(&path));
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve(args) => run(args, run_solve),
        Command::Bifurcate(args) => run(args, run_bifurcation),
        Command::Verify(args) => run(args, run_verify),
    }
}
