//! Synchronous lockstep execution over a point-to-point topology.
//!
//! Each round, every active party's pending messages are delivered and the
//! party runs its receive phase, producing the next round's messages. The
//! adversary is non-rushing: it sees the messages addressed to corrupted
//! parties in round `r` only when it computes the messages for round `r + 1`,
//! exactly like an honest party. Honest-to-honest traffic is never shown to
//! the adversary.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::run_trials;
use crate::protocol::{
    derive_coins, hex_bytes, Inbox, InputDomain, JointInput, Outcome, PartyId, PartyInput,
    PartyProgram, PartyState, ProtocolSpec, Round, RoundBound, DEFAULT_MESSAGE_CAP,
};
use crate::stats::{sub_seed, Proportion};

/// Undirected edge set over `n` nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Topology {
    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        Topology { n, edges }
    }

    pub fn cycle(k: usize) -> Self {
        let edges = (0..k)
            .filter(|_| k >= 2)
            .map(|a| ordered(a, (a + 1) % k))
            .filter(|(a, b)| a != b)
            .collect();
        Topology { n: k, edges }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains(&ordered(a, b))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Execution knobs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub max_rounds: u32,
    pub message_cap: usize,
    /// Only `false` is supported.
    pub rushing: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            max_rounds: 64,
            message_cap: DEFAULT_MESSAGE_CAP,
            rushing: false,
        }
    }
}

/// A message between two nodes, addressed by node index.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Envelope {
    pub from: usize,
    pub to: usize,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn new(from: usize, to: usize, payload: Vec<u8>) -> Self {
        Envelope { from, to, payload }
    }
}

/// Behaviour of the corrupted parties.
///
/// The engine calls `pre_announce` first, then `init`, then `step` once per
/// round. `step(r, inbound)` receives the round-`r` messages addressed to
/// corrupted parties and returns the messages corrupted parties send in
/// round `r + 1`.
pub trait Adversary: Send {
    fn corrupted(&self) -> &BTreeSet<usize>;

    /// Value committed to before any interaction.
    fn pre_announce(&mut self) -> Option<Outcome> {
        None
    }

    /// Round-1 messages.
    fn init(&mut self) -> Vec<Envelope>;

    fn step(&mut self, round: Round, inbound: &[Envelope]) -> Vec<Envelope>;

    fn output(&self) -> Vec<u8> {
        Vec::new()
    }

    /// True if the adversary stopped an internal simulation at a cap.
    fn truncated(&self) -> bool {
        false
    }
}

/// One executing node: its program and the map from the neighbor labels the
/// program uses to node indices.
#[derive(Clone, Debug)]
pub struct Node {
    pub program: Arc<dyn PartyProgram>,
    pub links: BTreeMap<PartyId, usize>,
}

/// Nodes of a plain protocol on the complete graph; labels are party indices.
pub fn complete_nodes(spec: &ProtocolSpec) -> Vec<Node> {
    let n = spec.n();
    spec.programs
        .iter()
        .enumerate()
        .map(|(i, program)| Node {
            program: Arc::clone(program),
            links: (0..n).filter(|&j| j != i).map(|j| (j, j)).collect(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PartyStatus {
    Halted { outcome: Outcome, round: u32 },
    Running,
    Corrupted,
}

impl PartyStatus {
    pub fn outcome(&self) -> Option<&Outcome> {
        match self {
            PartyStatus::Halted { outcome, .. } => Some(outcome),
            _ => None,
        }
    }
}

/// One delivered message. Field order is part of the dump format.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub round: u32,
    pub from: usize,
    pub to: usize,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    /// Every record sent or received by `node`.
    pub fn view_of(&self, node: usize) -> Vec<&TranscriptRecord> {
        self.records
            .iter()
            .filter(|r| r.from == node || r.to == node)
            .collect()
    }

    /// JSON lines, one record per `(round, edge)`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

#[derive(Clone, Debug)]
pub struct ExecutionResult {
    pub statuses: Vec<PartyStatus>,
    pub transcript: Transcript,
    pub rounds: u32,
    pub announcement: Option<Outcome>,
    pub adversary_output: Option<Vec<u8>>,
    /// `(party, round)` pairs where a party sent messages on its halting step.
    pub halt_violations: Vec<(usize, u32)>,
    /// Last state of every honest party.
    pub final_states: Vec<Option<PartyState>>,
}

impl ExecutionResult {
    pub fn outcome(&self, party: usize) -> Option<&Outcome> {
        self.statuses[party].outcome()
    }

    pub fn honest(&self) -> BTreeSet<usize> {
        self.statuses
            .iter()
            .enumerate()
            .filter(|(_, s)| !matches!(s, PartyStatus::Corrupted))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Core lockstep loop shared by every execution mode.
pub(crate) struct Engine<'a> {
    pub nodes: &'a [Node],
    pub inputs: &'a JointInput,
    pub seed: u64,
    pub cfg: &'a NetConfig,
    /// Fail if an honest party is running after this round.
    pub strict: Option<u32>,
}

impl Engine<'_> {
    pub fn run(&self, mut adversary: Option<&mut dyn Adversary>) -> Result<ExecutionResult> {
        let n = self.nodes.len();
        if self.inputs.len() != n {
            return Err(Error::InputCount {
                expected: n,
                actual: self.inputs.len(),
            });
        }
        if self.cfg.rushing {
            return Err(Error::InvalidArgument(
                "rushing adversaries are not supported".into(),
            ));
        }
        let corrupted: BTreeSet<usize> = adversary
            .as_ref()
            .map(|a| a.corrupted().clone())
            .unwrap_or_default();
        if let Some(&bad) = corrupted.iter().find(|&&c| c >= n) {
            return Err(Error::InvalidArgument(format!(
                "corrupted party {bad} out of range"
            )));
        }
        let reverse: Vec<BTreeMap<usize, PartyId>> = (0..n)
            .map(|v| self.nodes[v].links.iter().map(|(&l, &u)| (u, l)).collect())
            .collect();

        let announcement = adversary.as_mut().and_then(|a| a.pre_announce());

        let mut states: Vec<Option<PartyState>> = vec![None; n];
        let mut statuses: Vec<PartyStatus> = (0..n)
            .map(|i| {
                if corrupted.contains(&i) {
                    PartyStatus::Corrupted
                } else {
                    PartyStatus::Running
                }
            })
            .collect();
        let mut halt_violations = Vec::new();
        let mut pending: BTreeMap<(usize, usize), Vec<u8>> = BTreeMap::new();

        for i in (0..n).filter(|i| !corrupted.contains(i)) {
            let entry = &self.inputs.entries[i];
            let (state, out) = self.nodes[i]
                .program
                .init(&entry.input, entry.coins(self.seed));
            if let Some(outcome) = self.nodes[i].program.finished(&state) {
                statuses[i] = PartyStatus::Halted { outcome, round: 0 };
                if !out.is_empty() {
                    halt_violations.push((i, 0));
                }
            } else {
                self.route(i, out, &mut pending)?;
            }
            states[i] = Some(state);
        }
        if let Some(adv) = adversary.as_mut() {
            let out = adv.init();
            self.route_adversary(out, &corrupted, &mut pending)?;
        }

        let mut transcript = Transcript::default();
        let mut rounds = 0;
        let mut all_halted = statuses.iter().all(|s| !matches!(s, PartyStatus::Running));

        for round in 1..=self.cfg.max_rounds {
            if all_halted {
                break;
            }
            rounds = round;
            let delivered = std::mem::take(&mut pending);
            let mut inboxes: Vec<Inbox> = vec![Inbox::new(); n];
            let mut inbound = Vec::new();
            for ((from, to), payload) in delivered {
                if payload.len() > self.cfg.message_cap {
                    return Err(Error::MessageTooLarge {
                        from,
                        to,
                        round,
                        len: payload.len(),
                        cap: self.cfg.message_cap,
                    });
                }
                transcript.records.push(TranscriptRecord {
                    round,
                    from,
                    to,
                    payload: payload.clone(),
                });
                if corrupted.contains(&to) {
                    inbound.push(Envelope::new(from, to, payload));
                } else if matches!(statuses[to], PartyStatus::Running) {
                    inboxes[to].insert(reverse[to][&from], payload);
                }
            }

            for i in 0..n {
                if !matches!(statuses[i], PartyStatus::Running) {
                    continue;
                }
                let program = &self.nodes[i].program;
                let state = states[i].as_ref().expect("honest state present");
                let (next, out) = program.step(state, round, &inboxes[i]);
                if let Some(outcome) = program.finished(&next) {
                    statuses[i] = PartyStatus::Halted { outcome, round };
                    if !out.is_empty() {
                        halt_violations.push((i, round));
                    }
                } else {
                    self.route(i, out, &mut pending)?;
                }
                states[i] = Some(next);
            }
            if let Some(adv) = adversary.as_mut() {
                let out = adv.step(round, &inbound);
                self.route_adversary(out, &corrupted, &mut pending)?;
            }

            all_halted = statuses.iter().all(|s| !matches!(s, PartyStatus::Running));
            if let Some(q) = self.strict {
                if round == q && !all_halted {
                    let party = statuses
                        .iter()
                        .position(|s| matches!(s, PartyStatus::Running))
                        .expect("some party is running");
                    return Err(Error::StrictBoundExceeded {
                        party,
                        round,
                        bound: q,
                    });
                }
            }
        }

        Ok(ExecutionResult {
            statuses,
            transcript,
            rounds,
            announcement,
            adversary_output: adversary.as_ref().map(|a| a.output()),
            halt_violations,
            final_states: states,
        })
    }

    fn route(
        &self,
        from: usize,
        out: BTreeMap<PartyId, Vec<u8>>,
        pending: &mut BTreeMap<(usize, usize), Vec<u8>>,
    ) -> Result<()> {
        for (label, payload) in out {
            let to = *self.nodes[from]
                .links
                .get(&label)
                .ok_or(Error::TopologyViolation { from, to: label })?;
            pending.insert((from, to), payload);
        }
        Ok(())
    }

    fn route_adversary(
        &self,
        out: Vec<Envelope>,
        corrupted: &BTreeSet<usize>,
        pending: &mut BTreeMap<(usize, usize), Vec<u8>>,
    ) -> Result<()> {
        for env in out {
            let incident = corrupted.contains(&env.from)
                && env.to < self.nodes.len()
                && self.nodes[env.from].links.values().any(|&u| u == env.to);
            if !incident {
                return Err(Error::TopologyViolation {
                    from: env.from,
                    to: env.to,
                });
            }
            if corrupted.contains(&env.to) {
                // corrupted-to-corrupted traffic stays inside the adversary
                continue;
            }
            pending.insert((env.from, env.to), env.payload);
        }
        Ok(())
    }
}

/// Lockstep execution of arbitrary nodes without an adversary and without a
/// round-bound check; unfinished nodes report [`PartyStatus::Running`].
pub fn run_nodes(
    nodes: &[Node],
    inputs: &JointInput,
    seed: u64,
    cfg: &NetConfig,
) -> Result<ExecutionResult> {
    Engine {
        nodes,
        inputs,
        seed,
        cfg,
        strict: None,
    }
    .run(None)
}

fn strict_bound(spec: &ProtocolSpec, max_rounds: u32) -> Option<u32> {
    match spec.bound {
        RoundBound::Strict(q) if q <= max_rounds => Some(q),
        _ => None,
    }
}

/// Honest execution of `spec` on `inputs`, coins derived from `seed` and each
/// entry's label. Parties that have not finished by `max_rounds` are reported
/// as [`PartyStatus::Running`].
pub fn run_honest(
    spec: &ProtocolSpec,
    inputs: &JointInput,
    seed: u64,
    max_rounds: u32,
) -> Result<ExecutionResult> {
    let nodes = complete_nodes(spec);
    let cfg = NetConfig {
        max_rounds,
        ..NetConfig::default()
    };
    Engine {
        nodes: &nodes,
        inputs,
        seed,
        cfg: &cfg,
        strict: strict_bound(spec, max_rounds),
    }
    .run(None)
}

/// Honest execution that never fails on a round-bound breach; used by the
/// validator, which reports breaches instead.
pub(crate) fn execute_lenient(
    spec: &ProtocolSpec,
    inputs: &JointInput,
    seed: u64,
    cfg: &NetConfig,
) -> ExecutionResult {
    let nodes = complete_nodes(spec);
    Engine {
        nodes: &nodes,
        inputs,
        seed,
        cfg,
        strict: None,
    }
    .run(None)
    .unwrap_or_else(|_| ExecutionResult {
        statuses: vec![PartyStatus::Running; spec.n()],
        transcript: Transcript::default(),
        rounds: 0,
        announcement: None,
        adversary_output: None,
        halt_violations: Vec::new(),
        final_states: vec![None; spec.n()],
    })
}

/// Execution with the parties in `adv.corrupted()` driven by `adv`. Entries
/// of `inputs` for corrupted parties are ignored.
pub fn run_with_adversary(
    spec: &ProtocolSpec,
    adv: &mut dyn Adversary,
    inputs: &JointInput,
    seed: u64,
    max_rounds: u32,
) -> Result<ExecutionResult> {
    run_with_adversary_cfg(
        spec,
        adv,
        inputs,
        seed,
        &NetConfig {
            max_rounds,
            ..NetConfig::default()
        },
    )
}

pub fn run_with_adversary_cfg(
    spec: &ProtocolSpec,
    adv: &mut dyn Adversary,
    inputs: &JointInput,
    seed: u64,
    cfg: &NetConfig,
) -> Result<ExecutionResult> {
    let nodes = complete_nodes(spec);
    Engine {
        nodes: &nodes,
        inputs,
        seed,
        cfg,
        strict: strict_bound(spec, cfg.max_rounds),
    }
    .run(Some(adv))
}

/// True iff every honest party produced the same outcome (all-⊥ counts).
pub fn check_consistency(result: &ExecutionResult, honest: &BTreeSet<usize>) -> Result<bool> {
    let mut first: Option<&Outcome> = None;
    for &i in honest {
        let outcome = result.outcome(i).ok_or(Error::StillRunning(i))?;
        match first {
            None => first = Some(outcome),
            Some(f) if f != outcome => return Ok(false),
            _ => {}
        }
    }
    Ok(true)
}

/// Everything a single Monte-Carlo trial needs.
pub struct TrialSetup {
    pub adversary: Box<dyn Adversary>,
    pub inputs: JointInput,
    /// Seed for the honest parties' coins.
    pub seed: u64,
}

/// A randomized adversary: builds a fresh adversary instance (and the
/// matching honest inputs) for each trial seed.
pub trait AdversaryFactory: Send + Sync {
    fn name(&self) -> String;
    fn instantiate(&self, spec: &ProtocolSpec, trial_seed: u64) -> Result<TrialSetup>;
}

/// Inconsistency rate of one adversary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyEstimate {
    pub adversary: String,
    /// Fraction of trials whose honest outputs disagree.
    pub delta_hat: Proportion,
    /// Trials where an honest party was still running at the round cap;
    /// counted as inconsistent.
    pub unfinished: u64,
}

/// Estimates `δ̂ = Pr[honest outputs disagree]` for each adversary.
pub fn estimate_consistency(
    spec: &ProtocolSpec,
    family: &[&dyn AdversaryFactory],
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<Vec<ConsistencyEstimate>> {
    if trials < 100 {
        return Err(Error::Precondition(format!(
            "consistency estimation needs at least 100 trials, got {trials}"
        )));
    }
    let max_rounds = spec.default_max_rounds();
    family
        .iter()
        .enumerate()
        .map(|(k, factory)| {
            let master = sub_seed(seed, b"consistency", k as u64);
            let results = run_trials(trials, master, jobs, |_, tseed| {
                consistency_trial(spec, *factory, tseed, max_rounds)
            });
            let mut bad = 0;
            let mut unfinished = 0;
            for r in results {
                match r? {
                    TrialConsistency::Consistent => {}
                    TrialConsistency::Inconsistent => bad += 1,
                    TrialConsistency::Unfinished => {
                        bad += 1;
                        unfinished += 1;
                    }
                }
            }
            Ok(ConsistencyEstimate {
                adversary: factory.name(),
                delta_hat: Proportion::new(bad, trials as u64),
                unfinished,
            })
        })
        .collect()
}

pub(crate) enum TrialConsistency {
    Consistent,
    Inconsistent,
    Unfinished,
}

pub(crate) fn consistency_trial(
    spec: &ProtocolSpec,
    factory: &dyn AdversaryFactory,
    tseed: u64,
    max_rounds: u32,
) -> Result<TrialConsistency> {
    let mut setup = factory.instantiate(spec, tseed)?;
    let result = run_with_adversary(
        spec,
        setup.adversary.as_mut(),
        &setup.inputs,
        setup.seed,
        max_rounds,
    )?;
    let honest = result.honest();
    Ok(match check_consistency(&result, &honest) {
        Ok(true) => TrialConsistency::Consistent,
        Ok(false) => TrialConsistency::Inconsistent,
        Err(_) => TrialConsistency::Unfinished,
    })
}

/// Runs the honest programs of the corrupted parties; indistinguishable from
/// an honest execution.
pub struct Passive {
    corrupted: BTreeSet<usize>,
    programs: BTreeMap<usize, Arc<dyn PartyProgram>>,
    inputs: BTreeMap<usize, PartyInput>,
    states: BTreeMap<usize, PartyState>,
    halted: BTreeSet<usize>,
    n: usize,
    seed: u64,
}

impl Passive {
    /// `inputs` and `seed` are used for the corrupted parties exactly as an
    /// honest run would use them.
    pub fn new(
        spec: &ProtocolSpec,
        corrupted: BTreeSet<usize>,
        inputs: &JointInput,
        seed: u64,
    ) -> Self {
        Passive {
            programs: corrupted
                .iter()
                .map(|&c| (c, Arc::clone(&spec.programs[c])))
                .collect(),
            inputs: corrupted
                .iter()
                .map(|&c| (c, inputs.entries[c].clone()))
                .collect(),
            corrupted,
            states: BTreeMap::new(),
            halted: BTreeSet::new(),
            n: spec.n(),
            seed,
        }
    }
}

impl Adversary for Passive {
    fn corrupted(&self) -> &BTreeSet<usize> {
        &self.corrupted
    }

    fn init(&mut self) -> Vec<Envelope> {
        let mut out = Vec::new();
        for (&c, program) in &self.programs {
            let entry = &self.inputs[&c];
            let (state, msgs) = program.init(&entry.input, entry.coins(self.seed));
            if program.finished(&state).is_some() {
                self.halted.insert(c);
            } else {
                out.extend(msgs.into_iter().map(|(to, p)| Envelope::new(c, to, p)));
            }
            self.states.insert(c, state);
        }
        out
    }

    fn step(&mut self, round: Round, inbound: &[Envelope]) -> Vec<Envelope> {
        let mut out = Vec::new();
        for (&c, program) in &self.programs {
            if self.halted.contains(&c) {
                continue;
            }
            let inbox: Inbox = inbound
                .iter()
                .filter(|e| e.to == c)
                .map(|e| (e.from, e.payload.clone()))
                .collect();
            let (next, msgs) = program.step(&self.states[&c], round, &inbox);
            if program.finished(&next).is_some() {
                self.halted.insert(c);
            } else {
                out.extend(
                    msgs.into_iter()
                        .filter(|(to, _)| *to < self.n)
                        .map(|(to, p)| Envelope::new(c, to, p)),
                );
            }
            self.states.insert(c, next);
        }
        out
    }
}

/// Sends nothing, ever.
pub struct Silent {
    corrupted: BTreeSet<usize>,
}

impl Silent {
    pub fn new(corrupted: BTreeSet<usize>) -> Self {
        Silent { corrupted }
    }
}

impl Adversary for Silent {
    fn corrupted(&self) -> &BTreeSet<usize> {
        &self.corrupted
    }

    fn init(&mut self) -> Vec<Envelope> {
        Vec::new()
    }

    fn step(&mut self, _: Round, _: &[Envelope]) -> Vec<Envelope> {
        Vec::new()
    }
}

/// Split-brain equivocation by a single corrupted party: two personas run
/// the honest program on inputs of all-0 and all-1 symbols. Persona 0 talks
/// to the lower half of the honest parties, persona 1 to the rest, and each
/// persona only hears from its own audience.
pub struct Equivocator {
    corrupted: BTreeSet<usize>,
    party: usize,
    program: Arc<dyn PartyProgram>,
    audiences: [BTreeSet<usize>; 2],
    inputs: [Vec<u8>; 2],
    states: [Option<PartyState>; 2],
    halted: [bool; 2],
    seed: u64,
}

impl Equivocator {
    pub fn new(spec: &ProtocolSpec, party: usize, seed: u64) -> Self {
        let honest: Vec<usize> = (0..spec.n()).filter(|&j| j != party).collect();
        let half = honest.len().div_ceil(2);
        let domain = spec.domains[party];
        let one = (domain.symbols.saturating_sub(1)).min(1) as u8;
        Equivocator {
            corrupted: [party].into_iter().collect(),
            party,
            program: Arc::clone(&spec.programs[party]),
            audiences: [
                honest[..half].iter().copied().collect(),
                honest[half..].iter().copied().collect(),
            ],
            inputs: [vec![0; domain.len], vec![one; domain.len]],
            states: [None, None],
            halted: [false, false],
            seed,
        }
    }

    fn persona_coins(&self, k: usize) -> crate::protocol::CoinStream {
        derive_coins(self.seed, format!("P{}#{k}", self.party).as_bytes())
    }

    fn emit(&self, k: usize, msgs: BTreeMap<PartyId, Vec<u8>>, out: &mut Vec<Envelope>) {
        out.extend(
            msgs.into_iter()
                .filter(|(to, _)| self.audiences[k].contains(to))
                .map(|(to, p)| Envelope::new(self.party, to, p)),
        );
    }
}

impl Adversary for Equivocator {
    fn corrupted(&self) -> &BTreeSet<usize> {
        &self.corrupted
    }

    fn init(&mut self) -> Vec<Envelope> {
        let mut out = Vec::new();
        for k in 0..2 {
            let (state, msgs) = self.program.init(&self.inputs[k], self.persona_coins(k));
            self.halted[k] = self.program.finished(&state).is_some();
            if !self.halted[k] {
                self.emit(k, msgs, &mut out);
            }
            self.states[k] = Some(state);
        }
        out
    }

    fn step(&mut self, round: Round, inbound: &[Envelope]) -> Vec<Envelope> {
        let mut out = Vec::new();
        for k in 0..2 {
            if self.halted[k] {
                continue;
            }
            let inbox: Inbox = inbound
                .iter()
                .filter(|e| self.audiences[k].contains(&e.from))
                .map(|e| (e.from, e.payload.clone()))
                .collect();
            let state = self.states[k].as_ref().expect("persona initialised");
            let (next, msgs) = self.program.step(state, round, &inbox);
            self.halted[k] = self.program.finished(&next).is_some();
            if !self.halted[k] {
                self.emit(k, msgs, &mut out);
            }
            self.states[k] = Some(next);
        }
        out
    }
}

/// Factory for [`Passive`] with uniform honest inputs.
pub struct PassiveFactory {
    pub corrupted: BTreeSet<usize>,
}

impl AdversaryFactory for PassiveFactory {
    fn name(&self) -> String {
        format!("passive{:?}", self.corrupted)
    }

    fn instantiate(&self, spec: &ProtocolSpec, trial_seed: u64) -> Result<TrialSetup> {
        let inputs = spec.random_inputs(sub_seed(trial_seed, b"inputs", 0));
        let seed = sub_seed(trial_seed, b"coins", 0);
        Ok(TrialSetup {
            adversary: Box::new(Passive::new(spec, self.corrupted.clone(), &inputs, seed)),
            inputs,
            seed,
        })
    }
}

/// Factory for [`Equivocator`] with uniform honest inputs.
pub struct EquivocatorFactory {
    pub party: usize,
}

impl AdversaryFactory for EquivocatorFactory {
    fn name(&self) -> String {
        format!("equivocator[{}]", self.party)
    }

    fn instantiate(&self, spec: &ProtocolSpec, trial_seed: u64) -> Result<TrialSetup> {
        let inputs = spec.random_inputs(sub_seed(trial_seed, b"inputs", 0));
        let seed = sub_seed(trial_seed, b"coins", 0);
        Ok(TrialSetup {
            adversary: Box::new(Equivocator::new(spec, self.party, seed)),
            inputs,
            seed,
        })
    }
}

/// Factory for [`Silent`] with uniform honest inputs.
pub struct SilentFactory {
    pub corrupted: BTreeSet<usize>,
}

impl AdversaryFactory for SilentFactory {
    fn name(&self) -> String {
        format!("silent{:?}", self.corrupted)
    }

    fn instantiate(&self, spec: &ProtocolSpec, trial_seed: u64) -> Result<TrialSetup> {
        Ok(TrialSetup {
            adversary: Box::new(Silent::new(self.corrupted.clone())),
            inputs: spec.random_inputs(sub_seed(trial_seed, b"inputs", 0)),
            seed: sub_seed(trial_seed, b"coins", 0),
        })
    }
}

/// Zero inputs for `spec` with default labels.
pub fn zero_inputs(spec: &ProtocolSpec) -> JointInput {
    spec.inputs_from(spec.domains.iter().map(InputDomain::zeros).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    fn bits(spec: &ProtocolSpec, v: &[u8]) -> JointInput {
        spec.inputs_from(v.iter().map(|&b| vec![b]).collect())
    }

    #[test]
    fn passive_run_matches_honest_run() {
        for spec in [zoo::echo_xor(2, 4), zoo::fair_coin(3), zoo::xor_exchange(5)] {
            let inputs = spec.random_inputs(3);
            let honest = run_honest(&spec, &inputs, 11, 16).unwrap();
            let mut adv = Passive::new(&spec, set(&[1]), &inputs, 11);
            let passive = run_with_adversary(&spec, &mut adv, &inputs, 11, 16).unwrap();
            assert_eq!(honest.transcript.to_jsonl(), passive.transcript.to_jsonl());
            for i in passive.honest() {
                assert_eq!(honest.outcome(i), passive.outcome(i));
            }
        }
    }

    #[test]
    fn equivocator_splits_xor() {
        let spec = zoo::xor_exchange(3);
        let mut adv = Equivocator::new(&spec, 2, 0);
        let r = run_with_adversary(&spec, &mut adv, &bits(&spec, &[0, 0, 0]), 0, 4).unwrap();
        assert_eq!(r.outcome(0), Some(&Outcome::byte(0)));
        assert_eq!(r.outcome(1), Some(&Outcome::byte(1)));
        assert!(!check_consistency(&r, &r.honest()).unwrap());
    }

    struct Stray(BTreeSet<usize>);

    impl Adversary for Stray {
        fn corrupted(&self) -> &BTreeSet<usize> {
            &self.0
        }
        fn init(&mut self) -> Vec<Envelope> {
            vec![Envelope::new(0, 1, vec![1])]
        }
        fn step(&mut self, _: Round, _: &[Envelope]) -> Vec<Envelope> {
            Vec::new()
        }
    }

    #[test]
    fn adversary_cannot_speak_for_honest_parties() {
        let spec = zoo::xor_exchange(3);
        let mut adv = Stray(set(&[2]));
        let err = run_with_adversary(&spec, &mut adv, &zero_inputs(&spec), 0, 4).unwrap_err();
        assert_eq!(err, Error::TopologyViolation { from: 0, to: 1 });
    }

    #[test]
    fn cycle_topology_rejects_chords() {
        let t = Topology::cycle(6);
        assert!(t.has_edge(0, 5) && t.has_edge(2, 3));
        assert!(!t.has_edge(0, 3));
        assert_eq!(t.edges().count(), 6);
        assert_eq!(Topology::complete(4).edges().count(), 6);
    }

    fn fake_result(outcomes: Vec<PartyStatus>) -> ExecutionResult {
        let n = outcomes.len();
        ExecutionResult {
            statuses: outcomes,
            transcript: Transcript::default(),
            rounds: 1,
            announcement: None,
            adversary_output: None,
            halt_violations: Vec::new(),
            final_states: vec![None; n],
        }
    }

    #[test]
    fn consistency_cases() {
        let h = |o: Outcome| PartyStatus::Halted {
            outcome: o,
            round: 1,
        };
        let all = set(&[0, 1, 2]);
        let same = fake_result(vec![h(Outcome::byte(5)); 3]);
        assert!(check_consistency(&same, &all).unwrap());
        let bots = fake_result(vec![h(Outcome::Bot), h(Outcome::Bot)]);
        assert!(check_consistency(&bots, &set(&[0, 1])).unwrap());
        let split = fake_result(vec![h(Outcome::byte(0)), h(Outcome::byte(1))]);
        assert!(!check_consistency(&split, &set(&[0, 1])).unwrap());
        let running = fake_result(vec![h(Outcome::byte(0)), PartyStatus::Running]);
        assert_eq!(
            check_consistency(&running, &set(&[0, 1])),
            Err(Error::StillRunning(1))
        );
    }

    struct Recorder {
        corrupted: BTreeSet<usize>,
        seen: Vec<Envelope>,
    }

    impl Adversary for Recorder {
        fn corrupted(&self) -> &BTreeSet<usize> {
            &self.corrupted
        }
        fn init(&mut self) -> Vec<Envelope> {
            Vec::new()
        }
        fn step(&mut self, _: Round, inbound: &[Envelope]) -> Vec<Envelope> {
            self.seen.extend_from_slice(inbound);
            Vec::new()
        }
    }

    #[test]
    fn adversary_sees_only_its_own_channels() {
        let spec = zoo::echo_xor(2, 5);
        let mut adv = Recorder {
            corrupted: set(&[3]),
            seen: Vec::new(),
        };
        let r = run_with_adversary(&spec, &mut adv, &spec.random_inputs(1), 1, 8).unwrap();
        assert!(!adv.seen.is_empty());
        assert!(adv.seen.iter().all(|e| e.to == 3));
        let to_three = r.transcript.records.iter().filter(|t| t.to == 3).count();
        assert_eq!(adv.seen.len(), to_three);
    }

    #[test]
    fn messages_arrive_one_round_later() {
        let spec = zoo::echo_xor(2, 3);
        let r = run_honest(&spec, &spec.random_inputs(2), 2, 8).unwrap();
        assert_eq!(r.rounds, 3);
        let per_round: Vec<usize> = (1..=3)
            .map(|k| r.transcript.records.iter().filter(|t| t.round == k).count())
            .collect();
        // round 1 delivers init messages; halting parties send nothing in round 4
        assert_eq!(per_round, [6, 6, 6]);
    }

    #[test]
    fn transcript_jsonl_format() {
        let spec = zoo::xor_exchange(3);
        let r = run_honest(&spec, &bits(&spec, &[1, 0, 1]), 0, 4).unwrap();
        let text = r.transcript.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["round"], 1);
        assert_eq!(first["from"], 0);
        assert_eq!(first["to"], 1);
        assert_eq!(first["payload"], "01");
    }

    #[test]
    fn strict_bound_is_enforced() {
        let spec = zoo::echo_xor(2, 3);
        let mut liar = spec.clone();
        liar.bound = RoundBound::Strict(2);
        let err = run_honest(&liar, &zero_inputs(&liar), 0, 8).unwrap_err();
        assert!(matches!(
            err,
            Error::StrictBoundExceeded {
                round: 2,
                bound: 2,
                ..
            }
        ));
    }

    #[test]
    fn delta_hat_extremes() {
        let xor = zoo::xor_exchange(3);
        let eq = EquivocatorFactory { party: 2 };
        let est = estimate_consistency(&xor, &[&eq], 200, 1, 1).unwrap();
        assert_eq!(est[0].delta_hat.estimate, 1.0);
        let c = zoo::constant(4, 3);
        let est = estimate_consistency(&c, &[&eq], 200, 1, 2).unwrap();
        assert_eq!(est[0].delta_hat.hits, 0);
        assert!(estimate_consistency(&c, &[&eq], 99, 1, 1).is_err());
    }

    #[test]
    fn message_cap() {
        let spec = zoo::xor_exchange(3);
        let cfg = NetConfig {
            message_cap: 0,
            ..NetConfig::default()
        };
        let mut adv = Silent::new(set(&[2]));
        let err =
            run_with_adversary_cfg(&spec, &mut adv, &zero_inputs(&spec), 0, &cfg).unwrap_err();
        assert!(matches!(err, Error::MessageTooLarge { .. }));
    }
}
