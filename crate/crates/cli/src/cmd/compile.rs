use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use ringbreak::compiler::{
    compare_real_ideal, decision_space, wrap_dominated, AbortRule, CompareMode, HybridAdversary,
    InputRule, JointOutput, RealIdealComparison,
};
use ringbreak::dominance::Token;
use ringbreak::stats::sub_seed;
use serde::{Deserialize, Serialize};

use super::{corrupted_set, no_transcript, read_table};
use crate::report::{Output, Verdict};
use crate::IoArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareArg {
    Exhaustive,
    MonteCarlo,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileArgs {
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub t: Option<usize>,
    /// Comma-separated corrupted parties; defaults to the last `t`.
    #[arg(long, value_delimiter = ',')]
    pub corrupted: Option<Vec<usize>>,
    /// `never`, `always` or `coin:NUM/DEN`.
    #[arg(long)]
    pub abort: Option<String>,
    /// `keep`, `uniform:R` or `fixed:i=v;j=w`.
    #[arg(long)]
    pub inputs: Option<String>,
    /// Comma-separated honest inputs, one per party; defaults to zeros.
    #[arg(long, value_delimiter = ',')]
    pub honest_inputs: Option<Vec<u32>>,
    #[arg(long, value_enum)]
    pub compare: Option<CompareArg>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Largest Monte-Carlo distance accepted.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CompileConfig {
    table: PathBuf,
    t: usize,
    corrupted: Vec<usize>,
    abort: String,
    inputs: String,
    honest_inputs: Vec<u32>,
    compare: CompareArg,
    samples: u64,
    tolerance: f64,
}

#[derive(Debug, Serialize)]
struct CompileResult {
    n: usize,
    t: usize,
    t1: usize,
    t2: usize,
    y_star: Token,
    adversary: HybridAdversary,
    /// Real execution on coin 0.
    sample: JointOutput,
    comparison: RealIdealComparison,
    /// Decisions tried exhaustively for the corrupted set.
    decisions_checked: usize,
    honest_bot_seen: bool,
}

pub fn parse_abort(s: &str) -> Result<AbortRule> {
    Ok(match s {
        "never" => AbortRule::Never,
        "always" => AbortRule::Always,
        _ => {
            let frac = s.strip_prefix("coin:").ok_or_else(|| {
                anyhow!("--abort must be never, always or coin:NUM/DEN, got {s:?}")
            })?;
            let (a, b) = frac
                .split_once('/')
                .ok_or_else(|| anyhow!("coin abort needs NUM/DEN, got {frac:?}"))?;
            AbortRule::Coin {
                numerator: a.parse().context("abort numerator")?,
                denominator: b.parse().context("abort denominator")?,
            }
        }
    })
}

pub fn parse_inputs(s: &str) -> Result<InputRule> {
    if s == "keep" {
        return Ok(InputRule::Keep);
    }
    if let Some(r) = s.strip_prefix("uniform:") {
        return Ok(InputRule::Uniform {
            range: r.parse().context("uniform range")?,
        });
    }
    if let Some(list) = s.strip_prefix("fixed:") {
        let mut inputs = BTreeMap::new();
        for item in list.split(';').filter(|x| !x.is_empty()) {
            let (i, v) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("fixed input needs PARTY=VALUE, got {item:?}"))?;
            inputs.insert(i.parse().context("party")?, v.parse().context("value")?);
        }
        return Ok(InputRule::Fixed { inputs });
    }
    bail!("--inputs must be keep, uniform:R or fixed:i=v;..., got {s:?}")
}

pub fn run(flags: &CompileArgs, io: &IoArgs) -> Result<Output> {
    no_transcript(io, "compile")?;
    let (args, seed) = crate::config::layer(flags, io.config.as_deref(), io.seed, "compile")?;
    let Some(table) = args.table else {
        bail!("--table is required");
    };
    let f = read_table(&table)?;
    let n = f.n();
    let Some(t) = args.t else {
        bail!("--t is required");
    };
    let cfg = CompileConfig {
        table,
        t,
        corrupted: args
            .corrupted
            .unwrap_or_else(|| (n.saturating_sub(t)..n).collect()),
        abort: args.abort.unwrap_or_else(|| "always".into()),
        inputs: args.inputs.unwrap_or_else(|| "keep".into()),
        honest_inputs: args.honest_inputs.unwrap_or_else(|| vec![0; n]),
        compare: args.compare.unwrap_or(CompareArg::Exhaustive),
        samples: args.samples.unwrap_or(100_000),
        tolerance: args.tolerance.unwrap_or(0.01),
    };
    let w = wrap_dominated(&f, n, cfg.t).map_err(|e| match e {
        ringbreak::Error::UnsupportedSubcase(m) => anyhow!("UNSUPPORTED_SUBCASE: {m}"),
        other => anyhow!(other),
    })?;
    let adv = HybridAdversary::new(
        corrupted_set(&cfg.corrupted, n)?,
        parse_abort(&cfg.abort)?,
        parse_inputs(&cfg.inputs)?,
    );
    adv.validate(n)?;
    let x = &cfg.honest_inputs;
    let sample = w.real(&adv, x, 0)?;
    let mode = match cfg.compare {
        CompareArg::Exhaustive => CompareMode::Exhaustive,
        CompareArg::MonteCarlo => CompareMode::MonteCarlo {
            samples: cfg.samples,
            seed: sub_seed(seed, b"compare", 0),
        },
    };
    let comparison = compare_real_ideal(&w, &adv, x, mode)?;
    let decisions = decision_space(&w.cfg, &adv.corrupted);
    let mut honest_bot_seen = false;
    for d in &decisions {
        let out = w.run(x, &adv.corrupted, d)?;
        honest_bot_seen |= (0..n)
            .filter(|i| !adv.corrupted.contains(i))
            .any(|i| out.outputs[i].is_none());
    }
    let distance_ok = if comparison.exact {
        comparison.distance == 0.0
    } else {
        comparison.distance < cfg.tolerance
    };
    let verdict = if distance_ok && !honest_bot_seen && comparison.bot_rate == 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let result = CompileResult {
        n,
        t: cfg.t,
        t1: w.cfg.t1,
        t2: w.cfg.t2,
        y_star: w.y_star.clone(),
        adversary: adv,
        sample,
        comparison,
        decisions_checked: decisions.len(),
        honest_bot_seen,
    };
    Output::new("compile", seed, &cfg, &result, verdict)
}
