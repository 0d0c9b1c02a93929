use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mwt_harness::{exit_code, run_command, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mwt", version, about = "Microwave tomography by contrast-source inversion")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Noise seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the configured phantom as a contrast file.
    Phantom(Common),
    /// Simulate noisy measurements of the phantom.
    Simulate(Common),
    /// Run one inversion.
    Invert(Common),
    /// Adaptive-λ CSI without penalty, checked for degenerate blow-up.
    DegeneracyDemo(Common),
    /// One inversion per λ of the configured grid.
    LambdaSweep(Common),
    /// Unpenalized, early-stopped and penalized solutions.
    RegStudy(Common),
    /// Several algorithms from a shared starting point.
    Race(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Phantom(c) => (Command::Phantom, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Invert(c) => (Command::Invert, c),
        Cmd::DegeneracyDemo(c) => (Command::DegeneracyDemo, c),
        Cmd::LambdaSweep(c) => (Command::LambdaSweep, c),
        Cmd::RegStudy(c) => (Command::RegStudy, c),
        Cmd::Race(c) => (Command::Race, c),
    };
    let loaded = match &common.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    };
    let result = loaded.and_then(|mut cfg| {
        if let Some(seed) = common.seed {
            cfg.setup.seed = seed;
        }
        if let Some(dir) = common.output {
            cfg.output_dir = dir;
        }
        run_command(cmd, &cfg, &cfg.output_dir)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mwt: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
