//! `pxlab`: photon interval-defect simulations, classical baselines and fringe analysis.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Command, RunConfig};

#[derive(Parser)]
#[command(
    name = "pxlab",
    version,
    about = "Position/momentum interval defect lab"
)]
struct Cli {
    /// What to run.
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides io.output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    visibility: Option<f64>,
    /// Comma-separated distances in units of z_M.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    z: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.seed.is_some() {
        cfg.io.seed = cli.seed;
    }
    if cli.visibility.is_some() {
        cfg.visibility = cli.visibility;
    }
    if cli.z.is_some() {
        cfg.numerics.z = cli.z;
        cfg.numerics.z_range = None;
    }
    let out = cli
        .out
        .or_else(|| cfg.io.output.clone())
        .unwrap_or_else(|| PathBuf::from("pxlab-out"));
    match commands::run(cli.command, &cfg, &out) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
