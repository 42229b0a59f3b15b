pub mod attack;
pub mod coinflip;
pub mod compile;
pub mod consistency;
pub mod dominance;
pub mod validate;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ringbreak::dominance::FunctionTable;
use ringbreak::ring::corruption_size;
use ringbreak::{zoo, ProtocolSpec};

pub fn protocol(selector: &str, n: usize) -> Result<ProtocolSpec> {
    zoo::by_name(selector, n).with_context(|| format!("cannot build protocol {selector:?}"))
}

/// The attack's default corruption budget: 1 for three parties, `⌈n/3⌉`
/// otherwise.
pub fn default_t(n: usize) -> usize {
    n.div_ceil(3)
}

/// The highest-indexed parties, as many as the attack corrupts.
pub fn default_corrupted(n: usize, t: usize) -> Vec<usize> {
    let s = if n == 3 { 1 } else { corruption_size(n, t) };
    (n - s.min(n)..n).collect()
}

pub fn corrupted_set(v: &[usize], n: usize) -> Result<BTreeSet<usize>> {
    let set: BTreeSet<usize> = v.iter().copied().collect();
    if set.len() != v.len() {
        bail!("corrupted parties {v:?} contain duplicates");
    }
    if let Some(&bad) = set.iter().find(|&&c| c >= n) {
        bail!("corrupted party {bad} outside 0..{n}");
    }
    Ok(set)
}

pub fn read_table(path: &Path) -> Result<FunctionTable> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read table {}", path.display()))?;
    FunctionTable::from_json(&text).with_context(|| format!("invalid table {}", path.display()))
}

pub fn no_transcript(io: &crate::IoArgs, command: &str) -> Result<()> {
    if io.transcript.is_some() {
        bail!("--transcript is not supported by {command}");
    }
    Ok(())
}
