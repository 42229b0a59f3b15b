use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::netsim::{Adversary, Envelope, Node};
use crate::protocol::{Inbox, JointInput, Outbox, Outcome, PartyState, Round};

use super::{RingNetwork, Role};

/// Slots occupied by the honest parties in the attack, keyed by party.
///
/// Honest parties sit on adjacent slots of the first copies: with `C`
/// corrupted they take `A¹, B¹`; with `A` corrupted `B¹, C¹`; with `B`
/// corrupted `C¹, A²`. A single honest party takes its role's first slot.
pub fn honest_placement(
    ring: &RingNetwork,
    corrupted: &BTreeSet<usize>,
) -> Result<BTreeMap<usize, usize>> {
    if corrupted.is_empty() || corrupted.len() >= 3 || corrupted.iter().any(|&c| c >= 3) {
        return Err(Error::InvalidArgument(format!(
            "corrupted set {corrupted:?} must be a nonempty proper subset of {{0, 1, 2}}"
        )));
    }
    let honest: Vec<usize> = (0..3).filter(|p| !corrupted.contains(p)).collect();
    let copy_of = |party: usize| {
        if corrupted.len() == 1 && corrupted.contains(&Role::B.index()) && party == Role::A.index()
        {
            2
        } else {
            1
        }
    };
    Ok(honest
        .into_iter()
        .map(|p| (p, ring.index_of(Role::from_index(p), copy_of(p))))
        .collect())
}

/// Corrupts the roles not listed in `placement` and simulates every ring
/// slot other than the honest parties' slots. Messages between a simulated
/// slot and a real party's slot travel over the real channel between the
/// simulated slot's role and that party.
pub struct RingBridge {
    ring: RingNetwork,
    nodes: Vec<Node>,
    corrupted: BTreeSet<usize>,
    /// slot → honest party
    owner: BTreeMap<usize, usize>,
    /// party → slot
    placement: BTreeMap<usize, usize>,
    w: JointInput,
    coin_seed: u64,
    announce: Option<Outcome>,
    online_cap: u32,
    states: Vec<Option<PartyState>>,
    halted: Vec<Option<(Outcome, u32)>>,
    pending: BTreeMap<(usize, usize), Vec<u8>>,
    last_active: Vec<u32>,
    truncated: bool,
    announced: bool,
    observed_inbound: bool,
}

impl RingBridge {
    /// `placement` maps each honest party to the slot it occupies; the slot
    /// must carry the party's role, and two honest parties must sit on
    /// adjacent slots.
    pub fn new(
        ring: &RingNetwork,
        w: JointInput,
        coin_seed: u64,
        placement: BTreeMap<usize, usize>,
        announce: Option<Outcome>,
        online_cap: u32,
    ) -> Result<Self> {
        if w.len() != ring.len() {
            return Err(Error::InputCount {
                expected: ring.len(),
                actual: w.len(),
            });
        }
        for (&party, &slot) in &placement {
            if party >= 3 || slot >= ring.len() || ring.slot(slot).role.index() != party {
                return Err(Error::InvalidArgument(format!(
                    "party {party} cannot occupy slot {slot}"
                )));
            }
        }
        let slots: Vec<usize> = placement.values().copied().collect();
        if slots.is_empty() || slots.len() == 3 {
            return Err(Error::InvalidArgument(
                "one or two honest parties are required".into(),
            ));
        }
        if slots.len() == 2 && ring.distance(slots[0], slots[1]) != 1 {
            return Err(Error::InvalidArgument(
                "honest parties must occupy adjacent slots".into(),
            ));
        }
        let corrupted = (0..3).filter(|p| !placement.contains_key(p)).collect();
        let k = ring.len();
        Ok(RingBridge {
            nodes: ring.nodes(),
            ring: ring.clone(),
            corrupted,
            owner: placement.iter().map(|(&p, &s)| (s, p)).collect(),
            placement,
            w,
            coin_seed,
            announce,
            online_cap,
            states: vec![None; k],
            halted: vec![None; k],
            pending: BTreeMap::new(),
            last_active: vec![0; k],
            truncated: false,
            announced: false,
            observed_inbound: false,
        })
    }

    /// Last round in which simulated slot `s` was stepped while running.
    pub fn last_active_round(&self, s: usize) -> u32 {
        self.last_active[s]
    }

    /// Outcome and halting round of a simulated slot.
    pub fn slot_outcome(&self, s: usize) -> Option<&(Outcome, u32)> {
        self.halted[s].as_ref()
    }

    /// True if the announcement was made before any inbound message was
    /// handed to the adversary.
    pub fn announced_before_inbound(&self) -> bool {
        self.announced
    }

    pub fn placement(&self) -> &BTreeMap<usize, usize> {
        &self.placement
    }

    fn simulated(&self, s: usize) -> bool {
        !self.owner.contains_key(&s)
    }

    fn route(&mut self, from: usize, out: Outbox, sends: &mut Vec<Envelope>) {
        let role = self.ring.slot(from).role.index();
        for (label, payload) in out {
            let Some(&to) = self.nodes[from].links.get(&label) else {
                continue;
            };
            match self.owner.get(&to) {
                Some(&party) => sends.push(Envelope::new(role, party, payload)),
                None => {
                    self.pending.insert((from, to), payload);
                }
            }
        }
    }
}

impl Adversary for RingBridge {
    fn corrupted(&self) -> &BTreeSet<usize> {
        &self.corrupted
    }

    fn pre_announce(&mut self) -> Option<Outcome> {
        self.announced = !self.observed_inbound;
        self.announce.clone()
    }

    fn init(&mut self) -> Vec<Envelope> {
        let mut sends = Vec::new();
        #[allow(clippy::needless_range_loop)] // `s` indexes several parallel vectors
        for s in 0..self.ring.len() {
            if !self.simulated(s) {
                continue;
            }
            let entry = &self.w.entries[s];
            let program = self.nodes[s].program.clone();
            let (state, out) = program.init(&entry.input, entry.coins(self.coin_seed));
            if let Some(outcome) = program.finished(&state) {
                self.halted[s] = Some((outcome, 0));
            } else {
                self.route(s, out, &mut sends);
            }
            self.states[s] = Some(state);
        }
        sends
    }

    fn step(&mut self, round: Round, inbound: &[Envelope]) -> Vec<Envelope> {
        if !inbound.is_empty() {
            self.observed_inbound = true;
        }
        let running = |b: &Self, s: usize| b.simulated(s) && b.halted[s].is_none();
        if round > self.online_cap {
            if (0..self.ring.len()).any(|s| running(self, s)) {
                self.truncated = true;
            }
            return Vec::new();
        }
        let mut inboxes: Vec<Inbox> = vec![Inbox::new(); self.ring.len()];
        for ((from, to), payload) in std::mem::take(&mut self.pending) {
            inboxes[to].insert(self.ring.slot(from).role.index(), payload);
        }
        for env in inbound {
            let Some(&slot) = self.placement.get(&env.from) else {
                continue;
            };
            if env.to >= 3 || env.to == env.from {
                continue;
            }
            let target = self.ring.neighbour(slot, Role::from_index(env.to));
            if self.simulated(target) {
                inboxes[target].insert(env.from, env.payload.clone());
            }
        }
        let mut sends = Vec::new();
        #[allow(clippy::needless_range_loop)] // `s` indexes several parallel vectors
        for s in 0..self.ring.len() {
            if !running(self, s) {
                continue;
            }
            let program = self.nodes[s].program.clone();
            let state = self.states[s].take().expect("simulated state present");
            let (next, out) = program.step(&state, round, &inboxes[s]);
            self.last_active[s] = round;
            if let Some(outcome) = program.finished(&next) {
                self.halted[s] = Some((outcome, round));
            } else {
                self.route(s, out, &mut sends);
            }
            self.states[s] = Some(next);
        }
        sends
    }

    fn truncated(&self) -> bool {
        self.truncated
    }

    fn output(&self) -> Vec<u8> {
        match &self.announce {
            Some(Outcome::Value(v)) => v.clone(),
            _ => Vec::new(),
        }
    }
}
