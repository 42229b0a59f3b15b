//! Ring composition of a three-party protocol and the output-forcing attack
//! built on it.
//!
//! `m` copies of the parties `A, B, C` are laid out on a cycle
//! `A¹ B¹ C¹ A² … Cᵐ`. Every slot sees exactly one neighbor of each other
//! role, so its view is a valid view of the corresponding party in the
//! original protocol. Within `R` rounds, a slot's transcript depends only on
//! slots at distance at most `R`.
//!
//! Slot indices are 0-based: `(role, j) ↦ 3(j − 1) + role`.

mod attack;
mod bridge;
mod fuse;
mod locality;

pub use attack::{
    attack_adversary, attack_n_party, embedding_family, estimate_delta, run_attack_trials,
    AttackBound, AttackOptions, AttackStats, DeltaEstimate, EmbeddingFactory, HonestInputs,
    NPartyAttack, Variant,
};
pub use bridge::{honest_placement, RingBridge};
pub use fuse::{
    corruption_size, fuse_parties, partition_to_three, FusedProgram, Partition, Unfuse,
};
pub use locality::{check_locality, LocalityCheck, Spewer};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::{run_nodes, ExecutionResult, NetConfig, Node, PartyStatus, Topology};
use crate::protocol::{CoinStream, JointInput, Outcome, PartyInput, ProtocolSpec, RoundBound};
use crate::stats::sub_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    A,
    B,
    C,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::A, Role::B, Role::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Role {
        Role::ALL[i % 3]
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A ring position: a role and a 1-based copy index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot {
    pub role: Role,
    pub copy: usize,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.role, self.copy)
    }
}

/// `m` copies of a three-party protocol on a `3m`-cycle.
#[derive(Clone, Debug)]
pub struct RingNetwork {
    spec: ProtocolSpec,
    m: usize,
    topology: Topology,
}

pub fn build_ring(spec3: &ProtocolSpec, m: usize) -> Result<RingNetwork> {
    if spec3.n() != 3 {
        return Err(Error::NotThreeParty(spec3.n()));
    }
    if m < 2 {
        return Err(Error::RingTooSmall(m));
    }
    Ok(RingNetwork {
        spec: spec3.clone(),
        m,
        topology: Topology::cycle(3 * m),
    })
}

impl RingNetwork {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        3 * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spec(&self) -> &ProtocolSpec {
        &self.spec
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn slot(&self, s: usize) -> Slot {
        Slot {
            role: Role::from_index(s),
            copy: s / 3 + 1,
        }
    }

    pub fn index_of(&self, role: Role, copy: usize) -> usize {
        assert!(
            (1..=self.m).contains(&copy),
            "copy {copy} outside 1..={}",
            self.m
        );
        3 * (copy - 1) + role.index()
    }

    pub fn distance(&self, u: usize, v: usize) -> usize {
        let d = u.abs_diff(v);
        d.min(self.len() - d)
    }

    /// The neighbor of slot `s` that plays `role`. Panics if `role` is the
    /// role of `s` itself.
    pub fn neighbour(&self, s: usize, role: Role) -> usize {
        let k = self.len();
        let prev = (s + k - 1) % k;
        let next = (s + 1) % k;
        if Role::from_index(prev) == role {
            prev
        } else {
            assert_eq!(
                Role::from_index(next),
                role,
                "slot {s} has no {role} neighbor"
            );
            next
        }
    }

    /// Coin label of slot `s`, e.g. `A^1`.
    pub fn label(&self, s: usize) -> Vec<u8> {
        self.slot(s).to_string().into_bytes()
    }

    /// The designated slot `P* = A^{m/2+1}`, diametrically opposite `A¹`.
    pub fn designated(&self) -> usize {
        3 * (self.m / 2)
    }

    /// Executable nodes. A slot addresses its neighbors by their role index,
    /// exactly as the party of that role addresses its two peers.
    pub fn nodes(&self) -> Vec<Node> {
        (0..self.len())
            .map(|s| {
                let role = self.slot(s).role;
                let links = Role::ALL
                    .into_iter()
                    .filter(|&r| r != role)
                    .map(|r| (r.index(), self.neighbour(s, r)))
                    .collect();
                Node {
                    program: self.spec.programs[role.index()].clone(),
                    links,
                }
            })
            .collect()
    }

    /// `w` with uniform inputs drawn from `seed` and slot coin labels.
    pub fn random_w(&self, seed: u64) -> JointInput {
        let mut coins = CoinStream::new(seed, b"ring-inputs");
        JointInput {
            entries: (0..self.len())
                .map(|s| {
                    let domain = self.spec.domains[self.slot(s).role.index()];
                    PartyInput::new(domain.sample(&mut coins), self.label(s))
                })
                .collect(),
        }
    }

    /// `w` with all-zero inputs and slot coin labels.
    pub fn zero_w(&self) -> JointInput {
        JointInput {
            entries: (0..self.len())
                .map(|s| {
                    let domain = self.spec.domains[self.slot(s).role.index()];
                    PartyInput::new(domain.zeros(), self.label(s))
                })
                .collect(),
        }
    }
}

/// Runs the ring on `w` for at most `rounds_cap` rounds. Slot coins come from
/// `seed` and each entry's label.
pub fn emulate_ring(
    ring: &RingNetwork,
    w: &JointInput,
    rounds_cap: u32,
    seed: u64,
) -> Result<ExecutionResult> {
    if w.len() != ring.len() {
        return Err(Error::InputCount {
            expected: ring.len(),
            actual: w.len(),
        });
    }
    let cfg = NetConfig {
        max_rounds: rounds_cap,
        ..NetConfig::default()
    };
    run_nodes(&ring.nodes(), w, seed, &cfg)
}

/// Smallest even `m ≥ max(budget, 2)` whose designated slot lies at distance
/// greater than `budget` from every slot an honest party may occupy
/// (`A¹, B¹, C¹, A²`, i.e. slots 0 through 3).
pub fn ring_size_for(budget: u32) -> usize {
    let budget = budget as usize;
    let mut m = budget.max(2);
    m += m % 2;
    while 3 * m / 2 < budget + 4 {
        m += 2;
    }
    m
}

/// Outcome of the offline phase: the value `y*` the attack will force and
/// the ring input `w` that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackPhase1Result {
    pub y_star: Option<Outcome>,
    pub w: JointInput,
    pub coin_seed: u64,
    pub iterations_used: u32,
    pub aborted: bool,
    pub m: usize,
    /// Rounds the ring is run for: `q` (strict) or `2q` (expected).
    pub round_budget: u32,
}

/// Strict variant: one ring run of `q` rounds on all-zero inputs and fresh
/// coins; `y*` is the designated slot's output.
pub fn phase1_strict(spec3: &ProtocolSpec, seed: u64) -> Result<AttackPhase1Result> {
    let RoundBound::Strict(q) = spec3.bound else {
        return Err(Error::Precondition(format!(
            "{} does not declare a strict round bound",
            spec3.name
        )));
    };
    let ring = build_ring(spec3, ring_size_for(q))?;
    let w = ring.zero_w();
    let coin_seed = sub_seed(seed, b"phase1", 0);
    let run = emulate_ring(&ring, &w, q, coin_seed)?;
    let star = ring.designated();
    let PartyStatus::Halted { outcome, .. } = &run.statuses[star] else {
        return Err(Error::DesignatedSlotRunning(q));
    };
    Ok(AttackPhase1Result {
        y_star: Some(outcome.clone()),
        w,
        coin_seed,
        iterations_used: 1,
        aborted: false,
        m: ring.m(),
        round_budget: q,
    })
}

/// Expected variant: up to `z` independent ring runs of `2q` rounds each; the
/// first run in which the designated slot halts fixes `y*` and `w`.
pub fn phase1_expected(spec3: &ProtocolSpec, z: u32, seed: u64) -> Result<AttackPhase1Result> {
    if z == 0 {
        return Err(Error::InvalidArgument("z must be at least 1".into()));
    }
    let budget = 2 * spec3.bound.q().max(1);
    let ring = build_ring(spec3, ring_size_for(budget))?;
    let w = ring.zero_w();
    let star = ring.designated();
    let mut last_seed = 0;
    for i in 0..z {
        let coin_seed = sub_seed(seed, b"phase1", i as u64);
        last_seed = coin_seed;
        let run = emulate_ring(&ring, &w, budget, coin_seed)?;
        if let PartyStatus::Halted { outcome, .. } = &run.statuses[star] {
            return Ok(AttackPhase1Result {
                y_star: Some(outcome.clone()),
                w,
                coin_seed,
                iterations_used: i + 1,
                aborted: false,
                m: ring.m(),
                round_budget: budget,
            });
        }
    }
    Ok(AttackPhase1Result {
        y_star: None,
        w,
        coin_seed: last_seed,
        iterations_used: z,
        aborted: true,
        m: ring.m(),
        round_budget: budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn bfs_distance(ring: &RingNetwork, from: usize, to: usize) -> usize {
        let mut dist = vec![usize::MAX; ring.len()];
        let mut queue = VecDeque::from([from]);
        dist[from] = 0;
        while let Some(u) = queue.pop_front() {
            for v in 0..ring.len() {
                if ring.topology().has_edge(u, v) && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist[to]
    }

    #[test]
    fn two_copies_form_a_hexagon() {
        let ring = build_ring(&zoo::constant(0, 3), 2).unwrap();
        let names: Vec<String> = (0..6).map(|s| ring.slot(s).to_string()).collect();
        assert_eq!(names, ["A^1", "B^1", "C^1", "A^2", "B^2", "C^2"]);
        let edges: Vec<_> = ring.topology().edges().collect();
        assert_eq!(edges, [(0, 1), (0, 5), (1, 2), (2, 3), (3, 4), (4, 5)]);
    }

    #[test]
    fn rejects_small_rings_and_wrong_arity() {
        assert_eq!(
            build_ring(&zoo::constant(0, 3), 1).unwrap_err(),
            Error::RingTooSmall(1)
        );
        assert_eq!(
            build_ring(&zoo::constant(0, 4), 2).unwrap_err(),
            Error::NotThreeParty(4)
        );
    }

    #[test]
    fn distance_across_ten_copies() {
        let ring = build_ring(&zoo::constant(0, 3), 10).unwrap();
        let a1 = ring.index_of(Role::A, 1);
        let a5 = ring.index_of(Role::A, 5);
        assert_eq!(ring.distance(a1, a5), 12);
        assert_eq!(bfs_distance(&ring, a1, a5), 12);
        assert_eq!(ring.len() - 12, 18);
    }

    #[test]
    fn neighbours_present_the_other_two_roles() {
        let ring = build_ring(&zoo::constant(0, 3), 3).unwrap();
        for node in ring.nodes().iter() {
            assert_eq!(node.links.len(), 2);
        }
        assert_eq!(ring.neighbour(0, Role::C), 8);
        assert_eq!(ring.neighbour(0, Role::B), 1);
        assert_eq!(ring.neighbour(2, Role::A), 3);
    }

    #[test]
    fn constant_ring_outputs_constant() {
        let ring = build_ring(&zoo::constant(0, 3), 4).unwrap();
        let run = emulate_ring(&ring, &ring.zero_w(), 1, 9).unwrap();
        assert!(run
            .statuses
            .iter()
            .all(|s| s.outcome() == Some(&Outcome::byte(0))));
    }

    #[test]
    fn ring_size_keeps_designated_slot_out_of_reach() {
        for budget in 1..40 {
            let m = ring_size_for(budget);
            let ring = build_ring(&zoo::constant(0, 3), m).unwrap();
            assert!(m.is_multiple_of(2) && m >= budget as usize);
            for s in 0..4 {
                assert!(ring.distance(s, ring.designated()) > budget as usize);
            }
        }
        assert_eq!(ring_size_for(3), 6);
    }

    #[test]
    fn phase1_constant() {
        let r = phase1_strict(&zoo::constant(7, 3), 1).unwrap();
        assert_eq!(r.y_star, Some(Outcome::byte(7)));
        assert_eq!(r.iterations_used, 1);
        let r = phase1_expected(&zoo::constant(0, 3), 5, 1).unwrap();
        assert_eq!(r.iterations_used, 1);
        assert!(!r.aborted);
    }

    #[test]
    fn phase1_is_deterministic() {
        let spec = zoo::echo_xor(2, 3);
        assert_eq!(
            phase1_strict(&spec, 42).unwrap(),
            phase1_strict(&spec, 42).unwrap()
        );
    }

    #[test]
    fn phase1_reads_the_designated_coin() {
        let spec = zoo::fair_coin(3);
        let r = phase1_strict(&spec, 5).unwrap();
        let ring = build_ring(&spec, r.m).unwrap();
        let star = ring.designated();
        let own = crate::protocol::derive_coins(r.coin_seed, &ring.label(star)).next_bit();
        let left = crate::protocol::derive_coins(r.coin_seed, &ring.label(star - 1)).next_bit();
        let right = crate::protocol::derive_coins(r.coin_seed, &ring.label(star + 1)).next_bit();
        assert_eq!(r.y_star, Some(Outcome::byte(own ^ left ^ right)));
    }

    proptest! {
        #[test]
        fn distance_matches_bfs(m in 2usize..12, u in 0usize..36, v in 0usize..36) {
            let ring = build_ring(&zoo::constant(0, 3), m).unwrap();
            let (u, v) = (u % ring.len(), v % ring.len());
            prop_assert_eq!(ring.distance(u, v), bfs_distance(&ring, u, v));
        }
    }
}
