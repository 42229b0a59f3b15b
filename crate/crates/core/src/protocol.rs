//! Protocol and execution data model.
//!
//! A party is a deterministic state machine driven round by round. All of its
//! randomness comes from a [`CoinStream`] handed over at `init`, so a run is a
//! pure function of the inputs and coin seeds. This is what makes ring
//! embeddings and replays exact.
//!
//! Round semantics: `init` produces the messages sent in round 1. The call
//! `step(state, r, inbox)` is the receive phase of round `r`: `inbox` holds
//! the messages sent to the party in round `r`, and the returned outbox is
//! what the party sends in round `r + 1`. A party that reports an outcome
//! after `step(.., r, ..)` stopped being active in round `r`; its outbox from
//! that step must be empty.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::netsim::{self, ExecutionResult, NetConfig, PartyStatus};
use crate::stats::{sub_seed, trial_seed};

/// Neighbor label as seen by a program: the index of the party in the
/// protocol the program was written for.
pub type PartyId = usize;
pub type Round = u32;
pub type Inbox = BTreeMap<PartyId, Vec<u8>>;
pub type Outbox = BTreeMap<PartyId, Vec<u8>>;

/// Default per-round per-edge message cap in bytes.
pub const DEFAULT_MESSAGE_CAP: usize = 4096;

/// A party's output: a byte string or the error symbol ⊥.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Value(Vec<u8>),
    Bot,
}

impl Outcome {
    pub fn byte(b: u8) -> Self {
        Outcome::Value(vec![b])
    }

    pub fn is_bot(&self) -> bool {
        matches!(self, Outcome::Bot)
    }

    /// The value as a bit, if it is the single byte 0 or 1.
    pub fn as_bit(&self) -> Option<u8> {
        match self {
            Outcome::Value(v) if v.len() == 1 && v[0] <= 1 => Some(v[0]),
            _ => None,
        }
    }

    /// Parses the display form: `⊥` or lowercase hex.
    pub fn parse(s: &str) -> Option<Self> {
        if s == "⊥" {
            Some(Outcome::Bot)
        } else {
            hex::decode(s).ok().map(Outcome::Value)
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => f.write_str(&hex::encode(v)),
            Outcome::Bot => f.write_str("⊥"),
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Outcome::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad outcome {s:?}")))
    }
}

/// A deterministic byte stream derived from `(master_seed, label)`.
///
/// The generator is ChaCha20 keyed with
/// `SHA-256("ringbreak/coins/v1" || seed_le || label)`, which is fixed across
/// platforms. Reading advances the stream; cloning a stream clones its
/// position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoinStream {
    seed: u64,
    label: Vec<u8>,
    rng: ChaCha20Rng,
}

/// Derives the coin stream for `(master_seed, label)`.
pub fn derive_coins(master_seed: u64, label: &[u8]) -> CoinStream {
    CoinStream::new(master_seed, label)
}

impl CoinStream {
    pub fn new(seed: u64, label: &[u8]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"ringbreak/coins/v1");
        hasher.update(seed.to_le_bytes());
        hasher.update(label);
        let key: [u8; 32] = hasher.finalize().into();
        CoinStream {
            seed,
            label: label.to_vec(),
            rng: ChaCha20Rng::from_seed(key),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &[u8] {
        &self.label
    }

    /// An independent child stream, `label || "/" || sub`, starting at the
    /// beginning regardless of how much of `self` was consumed.
    pub fn fork(&self, sub: &[u8]) -> CoinStream {
        let mut label = self.label.clone();
        label.push(b'/');
        label.extend_from_slice(sub);
        CoinStream::new(self.seed, &label)
    }

    pub fn fill(&mut self, buf: &mut [u8]) {
        self.rng.fill_bytes(buf);
    }

    pub fn next_bytes(&mut self, n: usize) -> Vec<u8> {
        let mut buf = vec![0u8; n];
        self.fill(&mut buf);
        buf
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Low bit of the next byte.
    pub fn next_bit(&mut self) -> u8 {
        let mut b = [0u8; 1];
        self.fill(&mut b);
        b[0] & 1
    }

    /// True with probability `p`, resolved against a 64-bit uniform draw.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            return true;
        }
        if p <= 0.0 {
            return false;
        }
        let threshold = (p * 18_446_744_073_709_551_616.0) as u64;
        self.next_u64() < threshold
    }

    /// Uniform in `0..bound`.
    pub fn below(&mut self, bound: u64) -> u64 {
        self.rng.gen_range(0..bound)
    }
}

/// Object-safe view of a program state value.
pub trait StateValue: Any + fmt::Debug + Send + Sync {
    fn clone_boxed(&self) -> Box<dyn StateValue>;
    fn eq_dyn(&self, other: &dyn StateValue) -> bool;
    fn as_any(&self) -> &dyn Any;
}

impl<T> StateValue for T
where
    T: Any + Clone + PartialEq + fmt::Debug + Send + Sync,
{
    fn clone_boxed(&self) -> Box<dyn StateValue> {
        Box::new(self.clone())
    }

    fn eq_dyn(&self, other: &dyn StateValue) -> bool {
        other
            .as_any()
            .downcast_ref::<T>()
            .is_some_and(|o| o == self)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Type-erased program state, owned by exactly one execution context.
pub struct PartyState(Box<dyn StateValue>);

impl PartyState {
    pub fn new<T>(value: T) -> Self
    where
        T: Any + Clone + PartialEq + fmt::Debug + Send + Sync,
    {
        PartyState(Box::new(value))
    }

    pub fn downcast_ref<T: Any>(&self) -> Option<&T> {
        self.0.as_any().downcast_ref::<T>()
    }
}

impl Clone for PartyState {
    fn clone(&self) -> Self {
        PartyState(self.0.clone_boxed())
    }
}

impl PartialEq for PartyState {
    fn eq(&self, other: &Self) -> bool {
        self.0.eq_dyn(other.0.as_ref())
    }
}

impl fmt::Debug for PartyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A round-driven party with a concrete state type. Implement this; the
/// type-erased [`PartyProgram`] comes for free.
pub trait Program: fmt::Debug + Send + Sync {
    type State: Any + Clone + PartialEq + fmt::Debug + Send + Sync;

    fn role(&self) -> String;

    /// Initial state and the messages sent in round 1.
    fn init(&self, input: &[u8], coins: CoinStream) -> (Self::State, Outbox);

    /// Receive phase of `round`; returns the messages for `round + 1`.
    fn step(&self, state: &Self::State, round: Round, inbox: &Inbox) -> (Self::State, Outbox);

    fn finished(&self, state: &Self::State) -> Option<Outcome>;
}

/// Type-erased party program, the unit every protocol, virtual party and
/// composite is built from.
pub trait PartyProgram: fmt::Debug + Send + Sync {
    fn role(&self) -> String;
    fn init(&self, input: &[u8], coins: CoinStream) -> (PartyState, Outbox);
    fn step(&self, state: &PartyState, round: Round, inbox: &Inbox) -> (PartyState, Outbox);
    fn finished(&self, state: &PartyState) -> Option<Outcome>;
}

impl<P: Program> PartyProgram for P {
    fn role(&self) -> String {
        Program::role(self)
    }

    fn init(&self, input: &[u8], coins: CoinStream) -> (PartyState, Outbox) {
        let (state, out) = Program::init(self, input, coins);
        (PartyState::new(state), out)
    }

    fn step(&self, state: &PartyState, round: Round, inbox: &Inbox) -> (PartyState, Outbox) {
        let state = typed::<P>(state);
        let (next, out) = Program::step(self, state, round, inbox);
        (PartyState::new(next), out)
    }

    fn finished(&self, state: &PartyState) -> Option<Outcome> {
        Program::finished(self, typed::<P>(state))
    }
}

fn typed<P: Program>(state: &PartyState) -> &P::State {
    state
        .downcast_ref::<P::State>()
        .expect("state handed to a program it was not created by")
}

/// Declared round complexity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "q", rename_all = "snake_case")]
pub enum RoundBound {
    /// Every honest party halts by round `q`.
    Strict(u32),
    /// Honest parties halt by round `q` in expectation.
    Expected(u32),
}

impl RoundBound {
    pub fn q(&self) -> u32 {
        match *self {
            RoundBound::Strict(q) | RoundBound::Expected(q) => q,
        }
    }

    pub fn is_strict(&self) -> bool {
        matches!(self, RoundBound::Strict(_))
    }
}

/// Input domain of one party: `len` bytes, each in `0..symbols`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDomain {
    pub len: usize,
    pub symbols: u16,
}

impl InputDomain {
    pub const BIT: InputDomain = InputDomain { len: 1, symbols: 2 };

    pub fn zeros(&self) -> Vec<u8> {
        vec![0; self.len]
    }

    pub fn sample(&self, coins: &mut CoinStream) -> Vec<u8> {
        (0..self.len)
            .map(|_| coins.below(self.symbols as u64) as u8)
            .collect()
    }
}

/// An `n`-party protocol: one program per party plus declared metadata.
#[derive(Clone, Debug)]
pub struct ProtocolSpec {
    pub name: String,
    pub programs: Vec<Arc<dyn PartyProgram>>,
    pub bound: RoundBound,
    pub domains: Vec<InputDomain>,
}

impl ProtocolSpec {
    pub fn n(&self) -> usize {
        self.programs.len()
    }

    /// Default round cap: `4q` for strict specs, `64q` for expected ones.
    pub fn default_max_rounds(&self) -> u32 {
        match self.bound {
            RoundBound::Strict(q) => 4 * q.max(1),
            RoundBound::Expected(q) => 64 * q.max(1),
        }
    }

    /// Uniform inputs for every party with coin labels `P0..P{n-1}`.
    pub fn random_inputs(&self, seed: u64) -> JointInput {
        let mut coins = derive_coins(seed, b"inputs");
        JointInput {
            entries: self
                .domains
                .iter()
                .enumerate()
                .map(|(i, d)| PartyInput::new(d.sample(&mut coins), default_label(i)))
                .collect(),
        }
    }

    /// Explicit inputs with default coin labels.
    pub fn inputs_from(&self, inputs: Vec<Vec<u8>>) -> JointInput {
        JointInput {
            entries: inputs
                .into_iter()
                .enumerate()
                .map(|(i, x)| PartyInput::new(x, default_label(i)))
                .collect(),
        }
    }
}

/// Coin label of party `i` in a plain (non-ring) execution.
pub fn default_label(i: usize) -> Vec<u8> {
    format!("P{i}").into_bytes()
}

/// One party's share of a joint input: its actual input and the label its
/// coin stream is derived from. Together they play the role of `w`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyInput {
    #[serde(with = "hex_bytes")]
    pub input: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub coin_label: Vec<u8>,
}

impl PartyInput {
    pub fn new(input: Vec<u8>, coin_label: Vec<u8>) -> Self {
        PartyInput { input, coin_label }
    }

    pub fn coins(&self, seed: u64) -> CoinStream {
        derive_coins(seed, &self.coin_label)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointInput {
    pub entries: Vec<PartyInput>,
}

impl JointInput {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

/// A contract breach found by [`validate_spec`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A strict-q party was still running after round q.
    RoundBoundExceeded {
        trial: usize,
        party: usize,
        bound: u32,
    },
    /// A party sent messages on or after the step that finished it.
    ActiveAfterHalt {
        trial: usize,
        party: usize,
        round: u32,
    },
    /// A halted party's outcome changed on a later step.
    OutcomeChanged { trial: usize, party: usize },
    /// Two runs with identical seeds diverged.
    Nondeterminism { trial: usize },
    /// Stepping the same state twice gave different results.
    ImpureStep { trial: usize, party: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub trials: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Number of random continuations used to probe halted states.
const HALT_PROBES: usize = 8;

/// Runs the protocol honestly `trials` times on random inputs and coins and
/// reports contract violations. Violations are report content, not errors.
pub fn validate_spec(spec: &ProtocolSpec, trials: usize, seed: u64) -> ValidationReport {
    let mut report = ValidationReport {
        trials,
        violations: Vec::new(),
    };
    let cfg = NetConfig {
        max_rounds: spec.default_max_rounds(),
        ..NetConfig::default()
    };
    for trial in 0..trials {
        let tseed = trial_seed(seed, trial as u64);
        let inputs = spec.random_inputs(sub_seed(tseed, b"validate-inputs", 0));
        let first = netsim::execute_lenient(spec, &inputs, tseed, &cfg);
        let second = netsim::execute_lenient(spec, &inputs, tseed, &cfg);
        if first.transcript != second.transcript || first.statuses != second.statuses {
            report.violations.push(Violation::Nondeterminism { trial });
        }
        for (party, status) in first.statuses.iter().enumerate() {
            if let (RoundBound::Strict(q), PartyStatus::Running) = (spec.bound, status) {
                report.violations.push(Violation::RoundBoundExceeded {
                    trial,
                    party,
                    bound: q,
                });
            }
        }
        for &(party, round) in &first.halt_violations {
            report.violations.push(Violation::ActiveAfterHalt {
                trial,
                party,
                round,
            });
        }
        probe_halted_states(spec, &first, trial, tseed, &mut report);
    }
    report
}

/// Steps every halted party's final state on random continuations and checks
/// that it stays silent with an unchanged outcome, and that stepping is pure.
fn probe_halted_states(
    spec: &ProtocolSpec,
    result: &ExecutionResult,
    trial: usize,
    seed: u64,
    report: &mut ValidationReport,
) {
    let mut noise = derive_coins(seed, b"halt-probe");
    let mut flagged = BTreeSet::new();
    for (party, state) in result.final_states.iter().enumerate() {
        let (Some(state), PartyStatus::Halted { outcome, round }) =
            (state, &result.statuses[party])
        else {
            continue;
        };
        let program = &spec.programs[party];
        for k in 0..HALT_PROBES {
            let inbox = random_inbox(spec.n(), party, &mut noise);
            let r = round + 1 + k as u32;
            let (next, out) = program.step(state, r, &inbox);
            let again = program.step(state, r, &inbox);
            if again.0 != next || again.1 != out {
                report
                    .violations
                    .push(Violation::ImpureStep { trial, party });
            }
            if !out.is_empty() && flagged.insert((party, 0)) {
                report.violations.push(Violation::ActiveAfterHalt {
                    trial,
                    party,
                    round: r,
                });
            }
            if program.finished(&next).as_ref() != Some(outcome) && flagged.insert((party, 1)) {
                report
                    .violations
                    .push(Violation::OutcomeChanged { trial, party });
            }
        }
    }
}

pub(crate) fn random_inbox(n: usize, me: usize, coins: &mut CoinStream) -> Inbox {
    let mut inbox = Inbox::new();
    for j in (0..n).filter(|&j| j != me) {
        if coins.next_bit() == 1 {
            let len = coins.below(8) as usize;
            inbox.insert(j, coins.next_bytes(len));
        }
    }
    inbox
}
