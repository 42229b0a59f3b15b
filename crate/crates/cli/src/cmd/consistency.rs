use std::collections::BTreeSet;

use anyhow::Result;
use clap::{Args, ValueEnum};
use ringbreak::netsim::{
    estimate_consistency, AdversaryFactory, ConsistencyEstimate, EquivocatorFactory,
    PassiveFactory, SilentFactory,
};
use serde::{Deserialize, Serialize};

use super::{corrupted_set, no_transcript, protocol};
use crate::report::{Output, Verdict};
use crate::IoArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryArg {
    Passive,
    Silent,
    Equivocator,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyArgs {
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated adversaries; all three by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub adversaries: Option<Vec<AdversaryArg>>,
    /// Parties corrupted by the passive and silent adversaries.
    #[arg(long, value_delimiter = ',')]
    pub corrupted: Option<Vec<usize>>,
    /// Party corrupted by the equivocator.
    #[arg(long)]
    pub party: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ConsistencyConfig {
    protocol: String,
    n: usize,
    adversaries: Vec<AdversaryArg>,
    corrupted: Vec<usize>,
    party: usize,
    trials: usize,
}

#[derive(Debug, Serialize)]
struct ConsistencyResult {
    estimates: Vec<ConsistencyEstimate>,
    max_delta_hat: f64,
}

pub fn run(flags: &ConsistencyArgs, io: &IoArgs) -> Result<Output> {
    no_transcript(io, "consistency")?;
    let (args, seed) = crate::config::layer(flags, io.config.as_deref(), io.seed, "consistency")?;
    let n = args.n.unwrap_or(3);
    let cfg = ConsistencyConfig {
        protocol: args.protocol.unwrap_or_else(|| "xor_exchange".into()),
        n,
        adversaries: args.adversaries.unwrap_or_else(|| {
            vec![
                AdversaryArg::Passive,
                AdversaryArg::Silent,
                AdversaryArg::Equivocator,
            ]
        }),
        corrupted: args.corrupted.unwrap_or_else(|| vec![n.saturating_sub(1)]),
        party: args.party.unwrap_or(n.saturating_sub(1)),
        trials: args.trials.unwrap_or(1000),
    };
    let spec = protocol(&cfg.protocol, cfg.n)?;
    let corrupted: BTreeSet<usize> = corrupted_set(&cfg.corrupted, n)?;
    corrupted_set(&[cfg.party], n)?;
    let factories: Vec<Box<dyn AdversaryFactory>> = cfg
        .adversaries
        .iter()
        .map(|a| -> Box<dyn AdversaryFactory> {
            match a {
                AdversaryArg::Passive => Box::new(PassiveFactory {
                    corrupted: corrupted.clone(),
                }),
                AdversaryArg::Silent => Box::new(SilentFactory {
                    corrupted: corrupted.clone(),
                }),
                AdversaryArg::Equivocator => Box::new(EquivocatorFactory { party: cfg.party }),
            }
        })
        .collect();
    let refs: Vec<&dyn AdversaryFactory> = factories.iter().map(|f| f.as_ref()).collect();
    let estimates = estimate_consistency(&spec, &refs, cfg.trials, seed, io.jobs)?;
    let max_delta_hat = estimates
        .iter()
        .map(|e| e.delta_hat.estimate)
        .fold(0.0, f64::max);
    let mut csv = String::from("adversary,delta_hat,sigma,unfinished\n");
    for e in &estimates {
        csv.push_str(&format!(
            "\"{}\",{},{},{}\n",
            e.adversary, e.delta_hat.estimate, e.delta_hat.sigma, e.unfinished
        ));
    }
    let result = ConsistencyResult {
        estimates,
        max_delta_hat,
    };
    Ok(Output::new("consistency", seed, &cfg, &result, Verdict::Measured)?.with_csv(csv))
}
