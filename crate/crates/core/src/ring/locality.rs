//! Locality of ring executions: a slot's view after `r` rounds depends only
//! on slots within distance `r`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::netsim::{run_nodes, NetConfig, PartyStatus};
use crate::protocol::{CoinStream, Inbox, JointInput, Outbox, Outcome, Program, Round};

use super::RingNetwork;

/// Never halts; every round it sends 1 to 64 fresh random bytes to each
/// neighbour label.
#[derive(Clone, Debug)]
pub struct Spewer {
    pub labels: Vec<usize>,
}

impl Spewer {
    fn burst(&self, coins: &mut CoinStream) -> Outbox {
        self.labels
            .iter()
            .map(|&l| {
                let len = 1 + coins.below(64) as usize;
                (l, coins.next_bytes(len))
            })
            .collect()
    }
}

impl Program for Spewer {
    type State = CoinStream;

    fn role(&self) -> String {
        "spewer".into()
    }

    fn init(&self, _: &[u8], mut coins: CoinStream) -> (CoinStream, Outbox) {
        let out = self.burst(&mut coins);
        (coins, out)
    }

    fn step(&self, state: &CoinStream, _: Round, _: &Inbox) -> (CoinStream, Outbox) {
        let mut coins = state.clone();
        let out = self.burst(&mut coins);
        (coins, out)
    }

    fn finished(&self, _: &CoinStream) -> Option<Outcome> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalityCheck {
    /// Slots whose programs were replaced.
    pub replaced: Vec<usize>,
    pub view_identical: bool,
    pub outcome_identical: bool,
    pub outcome: Option<Outcome>,
}

impl LocalityCheck {
    pub fn holds(&self) -> bool {
        self.view_identical && self.outcome_identical
    }
}

/// Runs the ring for `rounds` rounds twice, the second time with every slot
/// at distance greater than `radius` from the designated slot replaced by a
/// [`Spewer`], and compares the designated slot's transcript and outcome.
pub fn check_locality(
    ring: &RingNetwork,
    w: &JointInput,
    rounds: u32,
    radius: usize,
    seed: u64,
) -> Result<LocalityCheck> {
    let star = ring.designated();
    let cfg = NetConfig {
        max_rounds: rounds,
        ..NetConfig::default()
    };
    let base = run_nodes(&ring.nodes(), w, seed, &cfg)?;
    let mut nodes = ring.nodes();
    let mut replaced = Vec::new();
    for (s, node) in nodes.iter_mut().enumerate() {
        if ring.distance(star, s) > radius {
            node.program = Arc::new(Spewer {
                labels: node.links.keys().copied().collect(),
            });
            replaced.push(s);
        }
    }
    let mutated = run_nodes(&nodes, w, seed, &cfg)?;
    let view = |r: &crate::netsim::ExecutionResult| {
        serde_json::to_string(&r.transcript.view_of(star)).expect("records serialize")
    };
    let outcome = |r: &crate::netsim::ExecutionResult| match &r.statuses[star] {
        PartyStatus::Halted { outcome, round } => Some((outcome.clone(), *round)),
        _ => None,
    };
    Ok(LocalityCheck {
        replaced,
        view_identical: view(&base) == view(&mutated),
        outcome_identical: outcome(&base) == outcome(&mutated),
        outcome: outcome(&base).map(|(o, _)| o),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::build_ring;
    use crate::zoo;

    #[test]
    fn far_mutants_are_invisible() {
        let spec = zoo::echo_xor(2, 3);
        let ring = build_ring(&spec, 4).unwrap();
        for seed in 0..20 {
            let w = ring.random_w(seed);
            let c = check_locality(&ring, &w, 3, 4, seed).unwrap();
            assert_eq!(c.replaced, vec![0, 1, 11]);
            assert!(c.holds(), "seed {seed}");
            assert!(c.outcome.is_some());
        }
    }

    /// With a radius below the round count the mutants do reach the slot.
    #[test]
    fn near_mutants_are_visible() {
        let spec = zoo::echo_xor(2, 3);
        let ring = build_ring(&spec, 4).unwrap();
        let c = check_locality(&ring, &ring.zero_w(), 3, 1, 0).unwrap();
        assert!(!c.view_identical);
    }
}
