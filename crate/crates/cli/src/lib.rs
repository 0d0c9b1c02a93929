//! Experiment runner for the `mwt` command-line tool.

pub mod config;
pub mod studies;

use std::path::Path;

use mwt_core::{Error, Result};

pub use config::ExperimentConfig;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Phantom,
    Simulate,
    Invert,
    DegeneracyDemo,
    LambdaSweep,
    RegStudy,
    Race,
}

/// Runs `cmd` and writes its files under `out`.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let out = Some(out);
    match cmd {
        Command::Phantom => studies::phantom(cfg, out).map(drop),
        Command::Simulate => studies::simulate(cfg, out).map(drop),
        Command::Invert => studies::invert(cfg, out).map(drop),
        Command::DegeneracyDemo => studies::degeneracy_demo(cfg, out).map(drop),
        Command::LambdaSweep => studies::lambda_sweep(cfg, out).map(drop),
        Command::RegStudy => studies::reg_study(cfg, out).map(drop),
        Command::Race => studies::race(cfg, out).map(drop),
    }
}

/// Process exit status for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}
