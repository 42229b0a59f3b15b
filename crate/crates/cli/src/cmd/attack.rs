use std::collections::BTreeSet;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use ringbreak::netsim::run_with_adversary;
use ringbreak::ring::{
    attack_n_party, estimate_delta, run_attack_trials, AttackBound, AttackOptions, AttackStats,
    DeltaEstimate, HonestInputs, Variant,
};
use ringbreak::stats::{binomial_sigma, sub_seed};
use serde::{Deserialize, Serialize};

use super::{corrupted_set, default_corrupted, default_t, protocol};
use crate::report::{Output, Verdict};
use crate::IoArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Strict,
    Expected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HonestInputsArg {
    Random,
    Zero,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackArgs {
    /// Zoo protocol selector, e.g. `echo_xor:2` or `geom_halt:0.5`.
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Corruption budget; defaults to ⌈n/3⌉.
    #[arg(long)]
    pub t: Option<usize>,
    /// Comma-separated corrupted parties (0-based).
    #[arg(long, value_delimiter = ',')]
    pub corrupted: Option<Vec<usize>>,
    /// Defaults to `strict` for strict-round protocols, else `expected`.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Phase-1 repetitions of the expected variant.
    #[arg(long)]
    pub z: Option<u32>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Trials per embedding for the inconsistency estimate; defaults to
    /// `trials` (at least 100); 0 skips it.
    #[arg(long)]
    pub delta_trials: Option<usize>,
    #[arg(long, value_enum)]
    pub honest_inputs: Option<HonestInputsArg>,
    /// Round cap for the online simulation.
    #[arg(long)]
    pub online_cap: Option<u32>,
}

#[derive(Debug, Serialize)]
struct AttackConfig {
    protocol: String,
    n: usize,
    t: usize,
    corrupted: Vec<usize>,
    variant: VariantArg,
    z: u32,
    trials: usize,
    delta_trials: usize,
    honest_inputs: HonestInputsArg,
    online_cap: Option<u32>,
}

#[derive(Debug, Serialize)]
struct AbortCheck {
    abort_rate: f64,
    limit: f64,
    holds: bool,
}

#[derive(Debug, Serialize)]
struct AttackResult {
    success_rate: f64,
    stats: AttackStats,
    delta: Option<DeltaEstimate>,
    bound: Option<AttackBound>,
    abort_check: Option<AbortCheck>,
}

fn resolve(args: AttackArgs) -> Result<AttackConfig> {
    let protocol = args.protocol.unwrap_or_else(|| "echo_xor:2".into());
    let n = args.n.unwrap_or(3);
    let t = args.t.unwrap_or_else(|| default_t(n));
    let spec = super::protocol(&protocol, n)?;
    let variant = args.variant.unwrap_or(if spec.bound.is_strict() {
        VariantArg::Strict
    } else {
        VariantArg::Expected
    });
    let trials = args.trials.unwrap_or(1000);
    Ok(AttackConfig {
        corrupted: args.corrupted.unwrap_or_else(|| default_corrupted(n, t)),
        protocol,
        n,
        t,
        variant,
        z: args.z.unwrap_or(8),
        trials,
        delta_trials: args.delta_trials.unwrap_or(trials.max(100)),
        honest_inputs: args.honest_inputs.unwrap_or(HonestInputsArg::Random),
        online_cap: args.online_cap,
    })
}

pub fn run(flags: &AttackArgs, io: &IoArgs) -> Result<Output> {
    let (args, seed) = crate::config::layer(flags, io.config.as_deref(), io.seed, "attack")?;
    let cfg = resolve(args)?;
    let spec = protocol(&cfg.protocol, cfg.n)?;
    let corrupted: BTreeSet<usize> = corrupted_set(&cfg.corrupted, cfg.n)?;
    let variant = match cfg.variant {
        VariantArg::Strict => Variant::Strict,
        VariantArg::Expected => Variant::Expected { z: cfg.z },
    };
    let honest_inputs = match cfg.honest_inputs {
        HonestInputsArg::Random => HonestInputs::Random,
        HonestInputsArg::Zero => HonestInputs::Zero,
    };
    let opts = AttackOptions {
        variant,
        honest_inputs,
        online_cap: cfg.online_cap,
    };
    let stats = run_attack_trials(&spec, cfg.t, &corrupted, &opts, cfg.trials, seed, io.jobs)
        .context("attack failed")?;

    let probe = attack_n_party(
        &spec,
        cfg.t,
        &corrupted,
        sub_seed(seed, b"sample", 0),
        variant,
        cfg.online_cap,
    )?;
    let delta = if cfg.delta_trials == 0 {
        None
    } else {
        let corrupted3 = if probe.partition.is_some() {
            BTreeSet::from([2])
        } else {
            corrupted.clone()
        };
        Some(estimate_delta(
            &probe.spec3,
            probe.phase1.m,
            &corrupted3,
            honest_inputs,
            cfg.delta_trials,
            sub_seed(seed, b"delta", 0),
            io.jobs,
        )?)
    };
    let bound = delta.as_ref().map(|d| AttackBound::new(&stats, d));
    let abort_check = matches!(variant, Variant::Expected { .. }).then(|| {
        let p = 0.5f64.powi(cfg.z as i32);
        let limit = p + 3.0 * binomial_sigma(p, cfg.trials as u64);
        AbortCheck {
            abort_rate: stats.aborts.estimate,
            limit,
            holds: stats.aborts.estimate <= limit,
        }
    });

    let verdict = match (&bound, &abort_check) {
        (_, Some(a)) if !a.holds => Verdict::Fail,
        (Some(b), _) if !b.holds => Verdict::Fail,
        (Some(b), _) if b.vacuous => Verdict::Vacuous,
        (Some(_), _) | (None, Some(_)) => Verdict::Pass,
        (None, None) => Verdict::Measured,
    };

    let transcript = match probe.adversary {
        Some(mut adv) => {
            let inputs = spec.random_inputs(sub_seed(seed, b"sample-inputs", 0));
            let r = run_with_adversary(
                &spec,
                adv.as_mut(),
                &inputs,
                sub_seed(seed, b"sample-coins", 0),
                spec.default_max_rounds(),
            )?;
            r.transcript.to_jsonl()
        }
        None => String::new(),
    };
    let csv = delta.as_ref().map(|d| {
        let mut s = String::from("edge,adversary,delta_hat,sigma,unfinished\n");
        for (e, est) in d.per_edge.iter().enumerate() {
            s.push_str(&format!(
                "{e},{},{},{},{}\n",
                est.adversary, est.delta_hat.estimate, est.delta_hat.sigma, est.unfinished
            ));
        }
        s
    });
    let result = AttackResult {
        success_rate: stats.success.estimate,
        stats,
        delta,
        bound,
        abort_check,
    };
    let mut out = Output::new("attack", seed, &cfg, &result, verdict)?.with_transcript(transcript);
    if let Some(csv) = csv {
        out = out.with_csv(csv);
    }
    Ok(out)
}
