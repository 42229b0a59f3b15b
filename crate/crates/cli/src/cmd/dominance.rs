use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use ringbreak::dominance::{
    classify, dominance_profile, is_k_dominated, is_weakly_k_dominated, verify_weak_implies_strong,
    ClaimVerdict, Classification, DominanceProfile, DominanceWitness, Verdict as Class,
    DEFAULT_BUDGET,
};
use serde::{Deserialize, Serialize};

use super::{no_transcript, read_table};
use crate::report::{Output, Verdict};
use crate::IoArgs;

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DominanceArgs {
    /// Table JSON: {"n": .., "domains": [..], "outputs": [..]}.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Expected number of parties; checked against the table.
    #[arg(long)]
    pub n: Option<usize>,
    /// Classify computability with `t` corruptions.
    #[arg(long)]
    pub t: Option<usize>,
    /// Report weak and strong witnesses for this `k`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Check weak m-dominance implies m-dominance (needs 3m ≤ n).
    #[arg(long)]
    pub claim_m: Option<usize>,
    /// Largest table the profile may scan.
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Debug, Serialize)]
struct DominanceConfig {
    table: PathBuf,
    n: Option<usize>,
    t: Option<usize>,
    k: Option<usize>,
    claim_m: Option<usize>,
    budget: u64,
}

#[derive(Debug, Serialize)]
struct Witnesses {
    k: usize,
    weak: Option<DominanceWitness>,
    strong: Option<DominanceWitness>,
}

#[derive(Debug, Serialize)]
struct DominanceResult {
    n: usize,
    domains: Vec<u32>,
    profile: DominanceProfile,
    witnesses: Option<Witnesses>,
    classification: Option<Classification>,
    claim: Option<ClaimVerdict>,
}

pub fn run(flags: &DominanceArgs, io: &IoArgs) -> Result<Output> {
    no_transcript(io, "dominance")?;
    let (args, seed) = crate::config::layer(flags, io.config.as_deref(), io.seed, "dominance")?;
    let Some(table) = args.table else {
        bail!("--table is required");
    };
    let cfg = DominanceConfig {
        table,
        n: args.n,
        t: args.t,
        k: args.k,
        claim_m: args.claim_m,
        budget: args.budget.unwrap_or(DEFAULT_BUDGET as u64),
    };
    let f = read_table(&cfg.table)?;
    if let Some(n) = cfg.n {
        if n != f.n() {
            bail!("table has {} parties, --n says {n}", f.n());
        }
    }
    let profile = dominance_profile(&f, u128::from(cfg.budget))?;
    let witnesses = cfg
        .k
        .map(|k| -> Result<Witnesses> {
            Ok(Witnesses {
                k,
                weak: is_weakly_k_dominated(&f, k)?,
                strong: is_k_dominated(&f, k)?,
            })
        })
        .transpose()?;
    let classification = cfg.t.map(|t| classify(&f, f.n(), t)).transpose()?;
    let claim = cfg
        .claim_m
        .map(|m| verify_weak_implies_strong(&f, m))
        .transpose()?;

    let verdict = if !profile.monotone || claim.as_ref().is_some_and(|c| !c.holds) {
        Verdict::Fail
    } else {
        match classification.as_ref().map(|c| c.verdict) {
            Some(Class::Computable) => Verdict::Computable,
            Some(Class::NotComputable) => Verdict::NotComputable,
            Some(Class::Conditional) => Verdict::Conditional,
            None if claim.is_some() => Verdict::Pass,
            None => Verdict::Measured,
        }
    };
    let csv = profile.to_csv();
    let result = DominanceResult {
        n: f.n(),
        domains: f.domains().to_vec(),
        profile,
        witnesses,
        classification,
        claim,
    };
    Ok(Output::new("dominance", seed, &cfg, &result, verdict)?.with_csv(csv))
}
