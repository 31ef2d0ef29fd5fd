// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod config;
mod error;
mod expr;
mod run;
mod svg;

use run::{Command, RunArgs};

/// Optimal Dirichlet regions for p-Laplace problems.
#[derive(Parser, Debug)]
#[command(name = "sigma-shape", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Mesh size, overriding the configuration.
    #[arg(long)]
    h: Option<f64>,
    /// Seed for jittering the initial region of `optimize`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = RunArgs {
        command: cli.command,
        config: cli.config,
        out: cli.out,
        h: cli.h,
        seed: cli.seed,
    };
    match run::run(&args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
