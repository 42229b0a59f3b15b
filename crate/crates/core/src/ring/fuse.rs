use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::{Adversary, Envelope};
use crate::protocol::{
    CoinStream, Inbox, InputDomain, Outbox, Outcome, PartyProgram, PartyState, Program,
    ProtocolSpec, Round,
};

/// Split of `[n]` into the two honest groups and the corrupted group that
/// play `A`, `B` and `C` of a three-party protocol. Indices are 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub b1: Vec<usize>,
    pub b2: Vec<usize>,
    pub corrupt: Vec<usize>,
}

impl Partition {
    pub fn groups(&self) -> [&[usize]; 3] {
        [&self.b1, &self.b2, &self.corrupt]
    }

    /// Group index (0, 1, 2) of every party.
    pub fn group_of(&self, n: usize) -> Vec<usize> {
        let mut g = vec![usize::MAX; n];
        for (k, members) in self.groups().into_iter().enumerate() {
            for &p in members {
                g[p] = k;
            }
        }
        g
    }
}

/// Number of parties the attack corrupts: `n − 2t` below an honest
/// majority bound, 1 otherwise.
pub fn corruption_size(n: usize, t: usize) -> usize {
    if 2 * t < n {
        n - 2 * t
    } else {
        1
    }
}

/// Requires `n ≥ 3`, `n/3 ≤ t < n` and `|I| = s`. `B1` gets the `t`
/// smallest non-corrupted indices and `B2` the next `t`; with `t ≥ n/2`, `B1`
/// gets `⌈(n−1)/2⌉` and `B2` the rest.
pub fn partition_to_three(n: usize, t: usize, corrupted: &BTreeSet<usize>) -> Result<Partition> {
    if n < 3 || 3 * t < n || t >= n {
        return Err(Error::Precondition(format!(
            "partition needs n ≥ 3 and n/3 ≤ t < n, got n={n}, t={t}"
        )));
    }
    let s = corruption_size(n, t);
    if corrupted.len() != s {
        return Err(Error::CorruptionSize {
            expected: s,
            actual: corrupted.len(),
        });
    }
    if let Some(&bad) = corrupted.iter().find(|&&c| c >= n) {
        return Err(Error::InvalidArgument(format!("party {bad} out of range")));
    }
    let rest: Vec<usize> = (0..n).filter(|i| !corrupted.contains(i)).collect();
    let cut = if 2 * t < n { t } else { (n - 1).div_ceil(2) };
    Ok(Partition {
        b1: rest[..cut].to_vec(),
        b2: rest[cut..].to_vec(),
        corrupt: corrupted.iter().copied().collect(),
    })
}

/// Encodes `(from, to, payload)` triples as `from:u32 to:u32 len:u32 bytes`
/// in little endian, in the given order.
pub(crate) fn encode_bundle(entries: &[(usize, usize, Vec<u8>)]) -> Vec<u8> {
    let mut out = Vec::new();
    for (from, to, payload) in entries {
        out.extend_from_slice(&(*from as u32).to_le_bytes());
        out.extend_from_slice(&(*to as u32).to_le_bytes());
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(payload);
    }
    out
}

/// Inverse of [`encode_bundle`]; a malformed tail is dropped.
pub(crate) fn decode_bundle(bytes: &[u8]) -> Vec<(usize, usize, Vec<u8>)> {
    let mut out = Vec::new();
    let mut rest = bytes;
    let word = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
    while rest.len() >= 12 {
        let (from, to, len) = (word(&rest[..4]), word(&rest[4..8]), word(&rest[8..12]));
        if rest.len() - 12 < len {
            break;
        }
        out.push((from, to, rest[12..12 + len].to_vec()));
        rest = &rest[12 + len..];
    }
    out
}

/// One party of the fused three-party protocol: runs every member program
/// of its group and multiplexes their cross-group traffic into one bundle
/// per peer group.
#[derive(Debug, Clone)]
pub struct FusedProgram {
    group: usize,
    members: Vec<usize>,
    group_of: Vec<usize>,
    programs: Vec<Arc<dyn PartyProgram>>,
    input_lens: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedState {
    members: Vec<PartyState>,
    outcomes: Vec<Option<Outcome>>,
    /// Intra-group messages for the next round, keyed by `(from, to)`.
    buffered: BTreeMap<(usize, usize), Vec<u8>>,
    outcome: Option<Outcome>,
}

impl FusedProgram {
    fn dispatch(
        &self,
        member: usize,
        out: Outbox,
        buffered: &mut BTreeMap<(usize, usize), Vec<u8>>,
        bundles: &mut [Vec<(usize, usize, Vec<u8>)>; 3],
    ) {
        for (to, payload) in out {
            let Some(&g) = self.group_of.get(to) else {
                continue;
            };
            if g == self.group {
                buffered.insert((member, to), payload);
            } else {
                bundles[g].push((member, to, payload));
            }
        }
    }

    fn outbox(bundles: [Vec<(usize, usize, Vec<u8>)>; 3]) -> Outbox {
        bundles
            .into_iter()
            .enumerate()
            .filter(|(_, b)| !b.is_empty())
            .map(|(g, mut b)| {
                b.sort();
                (g, encode_bundle(&b))
            })
            .collect()
    }
}

impl Program for FusedProgram {
    type State = FusedState;

    fn role(&self) -> String {
        format!("fused{:?}", self.members)
    }

    fn init(&self, input: &[u8], coins: CoinStream) -> (FusedState, Outbox) {
        let mut offset = 0;
        let mut buffered = BTreeMap::new();
        let mut bundles: [Vec<_>; 3] = Default::default();
        let mut members = Vec::new();
        let mut outcomes = Vec::new();
        for (k, &p) in self.members.iter().enumerate() {
            let len = self.input_lens[k];
            let mut x = input.get(offset..).unwrap_or(&[]).to_vec();
            x.resize(len, 0);
            x.truncate(len);
            offset += len;
            let member_coins = coins.fork(p.to_string().as_bytes());
            let (state, out) = self.programs[p].init(&x, member_coins);
            let done = self.programs[p].finished(&state);
            if done.is_none() {
                self.dispatch(p, out, &mut buffered, &mut bundles);
            }
            outcomes.push(done);
            members.push(state);
        }
        let mut state = FusedState {
            members,
            outcomes,
            buffered,
            outcome: None,
        };
        state.outcome = lowest_if_all(&state.outcomes);
        if state.outcome.is_some() {
            return (state, Outbox::new());
        }
        (state, Self::outbox(bundles))
    }

    fn step(&self, state: &FusedState, round: Round, inbox: &Inbox) -> (FusedState, Outbox) {
        if state.outcome.is_some() {
            return (state.clone(), Outbox::new());
        }
        let mut inboxes: BTreeMap<usize, Inbox> = BTreeMap::new();
        for ((from, to), payload) in &state.buffered {
            inboxes
                .entry(*to)
                .or_default()
                .insert(*from, payload.clone());
        }
        for (&g, bundle) in inbox {
            if g >= 3 || g == self.group {
                continue;
            }
            for (from, to, payload) in decode_bundle(bundle) {
                let from_ok = self.group_of.get(from) == Some(&g);
                let to_ok = self.group_of.get(to) == Some(&self.group);
                if from_ok && to_ok {
                    inboxes.entry(to).or_default().insert(from, payload);
                }
            }
        }
        let mut next = FusedState {
            members: state.members.clone(),
            outcomes: state.outcomes.clone(),
            buffered: BTreeMap::new(),
            outcome: None,
        };
        let mut bundles: [Vec<_>; 3] = Default::default();
        let empty = Inbox::new();
        for (k, &p) in self.members.iter().enumerate() {
            if next.outcomes[k].is_some() {
                continue;
            }
            let program = &self.programs[p];
            let member_inbox = inboxes.get(&p).unwrap_or(&empty);
            let (s, out) = program.step(&state.members[k], round, member_inbox);
            let done = program.finished(&s);
            if done.is_none() {
                self.dispatch(p, out, &mut next.buffered, &mut bundles);
            }
            next.outcomes[k] = done;
            next.members[k] = s;
        }
        next.outcome = lowest_if_all(&next.outcomes);
        if next.outcome.is_some() {
            next.buffered.clear();
            return (next, Outbox::new());
        }
        (next, Self::outbox(bundles))
    }

    fn finished(&self, state: &FusedState) -> Option<Outcome> {
        state.outcome.clone()
    }
}

fn lowest_if_all(outcomes: &[Option<Outcome>]) -> Option<Outcome> {
    if outcomes.iter().all(Option::is_some) {
        outcomes.first().cloned().flatten()
    } else {
        None
    }
}

/// Three-party protocol whose party `k` runs the members of group `k` of
/// `part`. The fused input is the concatenation of the member inputs in
/// member order; member coins are forks of the fused party's stream.
pub fn fuse_parties(spec: &ProtocolSpec, part: &Partition) -> Result<ProtocolSpec> {
    let n = spec.n();
    let group_of = part.group_of(n);
    if group_of.contains(&usize::MAX) || part.groups().iter().map(|g| g.len()).sum::<usize>() != n {
        return Err(Error::InvalidArgument(
            "partition does not cover the parties exactly once".into(),
        ));
    }
    if part.groups().iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidArgument(
            "partition has an empty group".into(),
        ));
    }
    let mut programs: Vec<Arc<dyn PartyProgram>> = Vec::new();
    let mut domains = Vec::new();
    for (k, members) in part.groups().into_iter().enumerate() {
        let mut sorted = members.to_vec();
        sorted.sort_unstable();
        let input_lens: Vec<usize> = sorted.iter().map(|&p| spec.domains[p].len).collect();
        domains.push(InputDomain {
            len: input_lens.iter().sum(),
            symbols: sorted
                .iter()
                .map(|&p| spec.domains[p].symbols)
                .min()
                .unwrap_or(1),
        });
        programs.push(Arc::new(FusedProgram {
            group: k,
            members: sorted,
            group_of: group_of.clone(),
            programs: spec.programs.clone(),
            input_lens,
        }));
    }
    Ok(ProtocolSpec {
        name: format!("fused({})", spec.name),
        programs,
        bound: spec.bound,
        domains,
    })
}

/// Runs an adversary written for the fused three-party protocol (corrupting
/// fused party 2) against the real `n`-party network, translating bundles to
/// and from individual envelopes.
pub struct Unfuse {
    inner: Box<dyn Adversary>,
    group_of: Vec<usize>,
    corrupted: BTreeSet<usize>,
}

impl Unfuse {
    pub fn new(inner: Box<dyn Adversary>, n: usize, part: &Partition) -> Result<Self> {
        if inner.corrupted().iter().copied().collect::<Vec<_>>() != [2] {
            return Err(Error::InvalidArgument(
                "the fused adversary must corrupt fused party 2 only".into(),
            ));
        }
        Ok(Unfuse {
            inner,
            group_of: part.group_of(n),
            corrupted: part.corrupt.iter().copied().collect(),
        })
    }

    fn translate(&self, fused: Vec<Envelope>) -> Vec<Envelope> {
        let mut out = Vec::new();
        for env in fused {
            for (from, to, payload) in decode_bundle(&env.payload) {
                if self.corrupted.contains(&from) && self.group_of.get(to) == Some(&env.to) {
                    out.push(Envelope::new(from, to, payload));
                }
            }
        }
        out
    }
}

impl Adversary for Unfuse {
    fn corrupted(&self) -> &BTreeSet<usize> {
        &self.corrupted
    }

    fn pre_announce(&mut self) -> Option<Outcome> {
        self.inner.pre_announce()
    }

    fn init(&mut self) -> Vec<Envelope> {
        let fused = self.inner.init();
        self.translate(fused)
    }

    fn step(&mut self, round: Round, inbound: &[Envelope]) -> Vec<Envelope> {
        let mut bundles: [Vec<(usize, usize, Vec<u8>)>; 3] = Default::default();
        for env in inbound {
            let g = self.group_of[env.from];
            if g < 2 {
                bundles[g].push((env.from, env.to, env.payload.clone()));
            }
        }
        let fused_inbound: Vec<Envelope> = bundles
            .into_iter()
            .enumerate()
            .filter(|(_, b)| !b.is_empty())
            .map(|(g, mut b)| {
                b.sort();
                Envelope::new(g, 2, encode_bundle(&b))
            })
            .collect();
        let fused = self.inner.step(round, &fused_inbound);
        self.translate(fused)
    }

    fn output(&self) -> Vec<u8> {
        self.inner.output()
    }

    fn truncated(&self) -> bool {
        self.inner.truncated()
    }
}
