//! `arrival`: exact occupancy curves, trajectory ensembles, threshold scans,
//! plane currents and the verification suite, all driven by one TOML config.
//!
//! Exit status: 0 success, 1 invalid input, 2 failed verification,
//! 3 ensemble aborted by integrator failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::{Env, VerificationFailed};

#[derive(Parser)]
#[command(
    name = "arrival",
    version,
    about = "Arrival-time statistics for a free Gaussian packet"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact occupancy curve and its scalars.
    Exact(Common),
    /// Trajectory ensemble for the configured field.
    Simulate(Common),
    /// Threshold coupling, plus optional paired ensembles at its multiples.
    LambdaScan(Common),
    /// Probability currents on the plane x = 0.
    Currents(Common),
    /// Oracle checks of the closed forms; exit status 2 on any failure.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config; built-in defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Dotted-key override, e.g. `--set packet.a=1.5` (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Replaces run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; output does not depend on it.
    #[arg(short, long, env = "ARRIVAL_WORKERS")]
    workers: Option<usize>,
}

type Action = fn(&Env, config::Config) -> Result<()>;

fn run(cli: Cli) -> Result<()> {
    let (common, action): (Common, Action) = match cli.command {
        Command::Exact(c) => (c, commands::exact),
        Command::Simulate(c) => (c, commands::simulate),
        Command::LambdaScan(c) => (c, commands::lambda_scan),
        Command::Currents(c) => (c, commands::currents),
        Command::Verify(c) => (c, commands::verify),
    };
    let mut cfg = config::load(common.config.as_deref(), &common.overrides)?;
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    let env = Env {
        out: common.out,
        workers: common.workers,
    };
    action(&env, cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<VerificationFailed>() {
            return 2;
        }
        if let Some(
            arrival_core::Error::TooManyFailures { .. } | arrival_core::Error::StepFailure { .. },
        ) = cause.downcast_ref::<arrival_core::Error>()
        {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
