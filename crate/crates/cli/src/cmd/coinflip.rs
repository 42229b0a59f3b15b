use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use ringbreak::coinflip::{
    measure_bias, verify_no_nontrivial_bias, BiasReport, BoundVerdict, NoBiasVerification,
};
use serde::{Deserialize, Serialize};

use super::{corrupted_set, default_corrupted, default_t, no_transcript, protocol};
use crate::report::{Output, Verdict};
use crate::IoArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Honest,
    Attack,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoinflipArgs {
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Phase-1 attempts before the attack gives up.
    #[arg(long)]
    pub kappa: Option<u32>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub corrupted: Option<Vec<usize>>,
    /// Bit the attack refuses to announce: `0`, `1` or `auto` (the minority).
    #[arg(long)]
    pub exclude: Option<String>,
    /// Honest mode: fail if the distance from uniform exceeds this.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CoinflipConfig {
    protocol: String,
    n: usize,
    mode: ModeArg,
    kappa: u32,
    trials: usize,
    corrupted: Vec<usize>,
    exclude: String,
    tolerance: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum CoinflipResult {
    Honest(BiasReport),
    Attack(Box<NoBiasVerification>),
}

pub fn run(flags: &CoinflipArgs, io: &IoArgs) -> Result<Output> {
    no_transcript(io, "coinflip")?;
    let (args, seed) = crate::config::layer(flags, io.config.as_deref(), io.seed, "coinflip")?;
    let n = args.n.unwrap_or(3);
    let cfg = CoinflipConfig {
        protocol: args.protocol.unwrap_or_else(|| "fair_coin".into()),
        n,
        mode: args.mode.unwrap_or(ModeArg::Honest),
        kappa: args.kappa.unwrap_or(10),
        trials: args.trials.unwrap_or(10_000),
        corrupted: args
            .corrupted
            .unwrap_or_else(|| default_corrupted(n, default_t(n))),
        exclude: args.exclude.unwrap_or_else(|| "auto".into()),
        tolerance: args.tolerance,
    };
    let spec = protocol(&cfg.protocol, cfg.n)?;
    let exclude = match cfg.exclude.as_str() {
        "auto" => None,
        "0" => Some(0),
        "1" => Some(1),
        other => bail!("--exclude must be 0, 1 or auto, got {other:?}"),
    };
    let (result, verdict, report) = match cfg.mode {
        ModeArg::Honest => {
            let r = measure_bias(&spec, None, cfg.trials, seed, io.jobs)?;
            let verdict = match cfg.tolerance {
                Some(tol) if r.distance <= tol => Verdict::Pass,
                Some(_) => Verdict::Fail,
                None => Verdict::Measured,
            };
            (CoinflipResult::Honest(r.clone()), verdict, r)
        }
        ModeArg::Attack => {
            let corrupted = corrupted_set(&cfg.corrupted, cfg.n)?;
            let v = verify_no_nontrivial_bias(
                &spec, &corrupted, exclude, cfg.kappa, cfg.trials, seed, io.jobs,
            )?;
            let verdict = match v.verdict {
                BoundVerdict::Pass => Verdict::Pass,
                BoundVerdict::Fail => Verdict::Fail,
                BoundVerdict::Inconclusive => Verdict::Inconclusive,
            };
            let report = v.forced.report.clone();
            (CoinflipResult::Attack(Box::new(v)), verdict, report)
        }
    };
    Ok(Output::new("coinflip", seed, &cfg, &result, verdict)?.with_csv(report.to_csv()))
}
