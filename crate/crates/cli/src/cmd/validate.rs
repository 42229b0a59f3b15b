use anyhow::Result;
use clap::Args;
use ringbreak::protocol::validate_spec;
use serde::{Deserialize, Serialize};

use super::{no_transcript, protocol};
use crate::report::{Output, Verdict};
use crate::IoArgs;

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateArgs {
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ValidateConfig {
    protocol: String,
    n: usize,
    trials: usize,
}

pub fn run(flags: &ValidateArgs, io: &IoArgs) -> Result<Output> {
    no_transcript(io, "validate")?;
    let (args, seed) = crate::config::layer(flags, io.config.as_deref(), io.seed, "validate")?;
    let cfg = ValidateConfig {
        protocol: args.protocol.unwrap_or_else(|| "echo_xor:2".into()),
        n: args.n.unwrap_or(3),
        trials: args.trials.unwrap_or(100),
    };
    let spec = protocol(&cfg.protocol, cfg.n)?;
    let report = validate_spec(&spec, cfg.trials, seed);
    let verdict = if report.is_clean() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Output::new("validate", seed, &cfg, &report, verdict)
}
