//! `ringbreak`: experiment runner for ring-composition attacks, dominance
//! analysis, the threshold wrapper and coin-flip bias.
//!
//! Exit codes: 0 success, 1 a checked bound or assertion failed, 2 input or
//! configuration error.

mod cmd;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::report::Verdict;

#[derive(Parser, Debug)]
#[command(
    name = "ringbreak",
    version,
    about = "Ring-composition attack laboratory"
)]
struct Cli {
    #[command(flatten)]
    io: IoArgs,
    #[command(subcommand)]
    command: Command,
}

/// Options that do not change results and are not embedded in reports.
#[derive(Args, Debug, Clone)]
pub struct IoArgs {
    /// Master seed; falls back to the config file, then RINGBREAK_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config file or an earlier report to re-run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for trial parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// CSV export path.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// JSONL transcript of a sample execution (attack only).
    #[arg(long, global = true)]
    pub transcript: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Force honest outputs with the ring-composition attack.
    Attack(cmd::attack::AttackArgs),
    /// Dominance profile and computability classification of a table.
    Dominance(cmd::dominance::DominanceArgs),
    /// Bias of a coin-flipping protocol, honest or under the forcing attack.
    Coinflip(cmd::coinflip::CoinflipArgs),
    /// Run the threshold wrapper and compare it with the full ideal model.
    Compile(cmd::compile::CompileArgs),
    /// Estimate inconsistency under reference adversaries.
    Consistency(cmd::consistency::ConsistencyArgs),
    /// Check a zoo protocol against the execution contract.
    Validate(cmd::validate::ValidateArgs),
}

fn run(cli: Cli) -> anyhow::Result<Verdict> {
    let io = &cli.io;
    let out = match &cli.command {
        Command::Attack(a) => cmd::attack::run(a, io)?,
        Command::Dominance(a) => cmd::dominance::run(a, io)?,
        Command::Coinflip(a) => cmd::coinflip::run(a, io)?,
        Command::Compile(a) => cmd::compile::run(a, io)?,
        Command::Consistency(a) => cmd::consistency::run(a, io)?,
        Command::Validate(a) => cmd::validate::run(a, io)?,
    };
    out.emit(io)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(v) if v.is_failure() => {
            eprintln!("verdict: {v}");
            ExitCode::from(1)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
