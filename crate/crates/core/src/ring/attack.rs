use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::{
    estimate_consistency, run_with_adversary, Adversary, AdversaryFactory, ConsistencyEstimate,
    PartyStatus, TrialSetup,
};
use crate::parallel::run_trials;
use crate::protocol::{default_label, derive_coins, JointInput, Outcome, PartyInput, ProtocolSpec};
use crate::stats::{sub_seed, Proportion};

use super::bridge::{honest_placement, RingBridge};
use super::fuse::{fuse_parties, partition_to_three, Partition, Unfuse};
use super::{build_ring, phase1_expected, phase1_strict, AttackPhase1Result, RingNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Strict,
    Expected { z: u32 },
}

/// Inputs of the honest parties in attack trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HonestInputs {
    #[default]
    Random,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOptions {
    pub variant: Variant,
    pub honest_inputs: HonestInputs,
    /// Round cap of the online simulation; defaults to the protocol's
    /// default round cap.
    pub online_cap: Option<u32>,
}

impl AttackOptions {
    pub fn strict() -> Self {
        AttackOptions {
            variant: Variant::Strict,
            honest_inputs: HonestInputs::Random,
            online_cap: None,
        }
    }

    pub fn expected(z: u32) -> Self {
        AttackOptions {
            variant: Variant::Expected { z },
            ..Self::strict()
        }
    }
}

/// The forcing adversary for a three-party protocol: honest parties are
/// placed per [`honest_placement`] and every other slot runs on `phase1.w`.
pub fn attack_adversary(
    ring: &RingNetwork,
    phase1: &AttackPhase1Result,
    corrupted: &BTreeSet<usize>,
    online_cap: u32,
) -> Result<RingBridge> {
    if phase1.aborted {
        return Err(Error::PhaseOneAborted);
    }
    let placement = honest_placement(ring, corrupted)?;
    RingBridge::new(
        ring,
        phase1.w.clone(),
        phase1.coin_seed,
        placement,
        phase1.y_star.clone(),
        online_cap,
    )
}

/// A prepared attack on an `n`-party protocol.
pub struct NPartyAttack {
    pub phase1: AttackPhase1Result,
    /// `None` for three-party protocols, which are attacked directly.
    pub partition: Option<Partition>,
    /// The three-party protocol the ring is built from.
    pub spec3: ProtocolSpec,
    /// `None` when phase 1 aborted.
    pub adversary: Option<Box<dyn Adversary>>,
}

/// Prepares the attack corrupting exactly `corrupted`. Three-party protocols
/// are attacked directly (one or two corruptions); larger ones are first
/// fused into three parties.
pub fn attack_n_party(
    spec: &ProtocolSpec,
    t: usize,
    corrupted: &BTreeSet<usize>,
    seed: u64,
    variant: Variant,
    online_cap: Option<u32>,
) -> Result<NPartyAttack> {
    let n = spec.n();
    let (spec3, partition) = if n == 3 {
        if corrupted.is_empty() || corrupted.len() > 2 || corrupted.iter().any(|&c| c >= 3) {
            return Err(Error::InvalidArgument(format!(
                "corrupted set {corrupted:?} must be a nonempty proper subset of the parties"
            )));
        }
        (spec.clone(), None)
    } else {
        let part = partition_to_three(n, t, corrupted)?;
        (fuse_parties(spec, &part)?, Some(part))
    };
    let phase1 = match variant {
        Variant::Strict => phase1_strict(&spec3, seed)?,
        Variant::Expected { z } => phase1_expected(&spec3, z, seed)?,
    };
    if phase1.aborted {
        return Ok(NPartyAttack {
            phase1,
            partition,
            spec3,
            adversary: None,
        });
    }
    let cap = online_cap.unwrap_or_else(|| spec3.default_max_rounds());
    let ring = build_ring(&spec3, phase1.m)?;
    let adversary: Box<dyn Adversary> = match &partition {
        None => Box::new(attack_adversary(&ring, &phase1, corrupted, cap)?),
        Some(part) => {
            let fused_corrupt = BTreeSet::from([2]);
            let inner = attack_adversary(&ring, &phase1, &fused_corrupt, cap)?;
            Box::new(Unfuse::new(Box::new(inner), n, part)?)
        }
    };
    Ok(NPartyAttack {
        phase1,
        partition,
        spec3,
        adversary: Some(adversary),
    })
}

/// Aggregate of independent attack trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackStats {
    pub trials: u64,
    /// All honest parties output the pre-announced value.
    pub success: Proportion,
    pub aborts: Proportion,
    /// Trials with some honest party still running at the round cap.
    pub unfinished: u64,
    /// Trials whose honest outputs disagree.
    pub inconsistent: u64,
    /// Trials where the online simulation hit its cap.
    pub truncated: u64,
    pub y_star_histogram: BTreeMap<String, u64>,
    /// Outputs per honest party, `running` for unfinished ones.
    pub per_party_outputs: BTreeMap<usize, BTreeMap<String, u64>>,
    pub m: usize,
    pub round_budget: u32,
    pub q: u32,
    pub iterations_used: BTreeMap<u32, u64>,
}

struct TrialRecord {
    aborted: bool,
    success: bool,
    unfinished: bool,
    inconsistent: bool,
    truncated: bool,
    y_star: Option<Outcome>,
    outputs: Vec<(usize, String)>,
    m: usize,
    round_budget: u32,
    iterations: u32,
}

fn attack_trial(
    spec: &ProtocolSpec,
    t: usize,
    corrupted: &BTreeSet<usize>,
    opts: &AttackOptions,
    tseed: u64,
) -> Result<TrialRecord> {
    let attack = attack_n_party(
        spec,
        t,
        corrupted,
        sub_seed(tseed, b"attack", 0),
        opts.variant,
        opts.online_cap,
    )?;
    let mut record = TrialRecord {
        aborted: attack.phase1.aborted,
        success: false,
        unfinished: false,
        inconsistent: false,
        truncated: false,
        y_star: attack.phase1.y_star.clone(),
        outputs: Vec::new(),
        m: attack.phase1.m,
        round_budget: attack.phase1.round_budget,
        iterations: attack.phase1.iterations_used,
    };
    let Some(mut adversary) = attack.adversary else {
        return Ok(record);
    };
    let inputs = match opts.honest_inputs {
        HonestInputs::Random => spec.random_inputs(sub_seed(tseed, b"honest-inputs", 0)),
        HonestInputs::Zero => crate::netsim::zero_inputs(spec),
    };
    let result = run_with_adversary(
        spec,
        adversary.as_mut(),
        &inputs,
        sub_seed(tseed, b"honest-coins", 0),
        spec.default_max_rounds(),
    )?;
    record.truncated = adversary.truncated();
    let mut seen = BTreeSet::new();
    for (i, status) in result.statuses.iter().enumerate() {
        match status {
            PartyStatus::Corrupted => {}
            PartyStatus::Running => {
                record.unfinished = true;
                record.outputs.push((i, "running".into()));
            }
            PartyStatus::Halted { outcome, .. } => {
                seen.insert(outcome.clone());
                record.outputs.push((i, outcome.to_string()));
            }
        }
    }
    record.inconsistent = seen.len() > 1;
    record.success =
        !record.unfinished && seen.len() == 1 && seen.iter().next() == record.y_star.as_ref();
    Ok(record)
}

/// Runs `trials` independent attacks, each with its own phase 1, honest
/// inputs and honest coins derived from `(seed, trial)`.
pub fn run_attack_trials(
    spec: &ProtocolSpec,
    t: usize,
    corrupted: &BTreeSet<usize>,
    opts: &AttackOptions,
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<AttackStats> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let records = run_trials(trials, seed, jobs, |_, tseed| {
        attack_trial(spec, t, corrupted, opts, tseed)
    });
    let mut stats = AttackStats {
        trials: trials as u64,
        success: Proportion::new(0, 0),
        aborts: Proportion::new(0, 0),
        unfinished: 0,
        inconsistent: 0,
        truncated: 0,
        y_star_histogram: BTreeMap::new(),
        per_party_outputs: BTreeMap::new(),
        m: 0,
        round_budget: 0,
        q: spec.bound.q(),
        iterations_used: BTreeMap::new(),
    };
    let (mut successes, mut aborts) = (0, 0);
    for record in records {
        let r = record?;
        successes += u64::from(r.success);
        aborts += u64::from(r.aborted);
        stats.unfinished += u64::from(r.unfinished);
        stats.inconsistent += u64::from(r.inconsistent);
        stats.truncated += u64::from(r.truncated);
        stats.m = r.m;
        stats.round_budget = r.round_budget;
        *stats.iterations_used.entry(r.iterations).or_default() += 1;
        let key = r
            .y_star
            .map_or_else(|| "abort".to_string(), |y| y.to_string());
        *stats.y_star_histogram.entry(key).or_default() += 1;
        for (party, out) in r.outputs {
            *stats
                .per_party_outputs
                .entry(party)
                .or_default()
                .entry(out)
                .or_default() += 1;
        }
    }
    stats.success = Proportion::new(successes, trials as u64);
    stats.aborts = Proportion::new(aborts, trials as u64);
    Ok(stats)
}

/// Places the honest pair of a three-party execution on the ring edge
/// `(edge, edge + 1)`, corrupting the third role. The pair runs with exactly
/// the inputs and coins of those slots, so its joint view is that of the two
/// ring slots. Slots in `honest_slots` receive uniform inputs, matching the
/// ring the attack creates.
pub struct EmbeddingFactory {
    ring: RingNetwork,
    edge: usize,
    honest_slots: Vec<usize>,
    randomize: bool,
    online_cap: u32,
}

impl EmbeddingFactory {
    pub fn new(
        ring: &RingNetwork,
        edge: usize,
        honest_slots: Vec<usize>,
        randomize: bool,
        online_cap: u32,
    ) -> Self {
        EmbeddingFactory {
            ring: ring.clone(),
            edge,
            honest_slots,
            randomize,
            online_cap,
        }
    }

    /// The `w` this factory samples for `trial_seed`, and its coin seed.
    pub fn sample_w(&self, trial_seed: u64) -> (JointInput, u64) {
        let mut w = self.ring.zero_w();
        if self.randomize {
            let mut coins = derive_coins(sub_seed(trial_seed, b"embedding-inputs", 0), b"w");
            for &s in &self.honest_slots {
                let domain = self.ring.spec().domains[self.ring.slot(s).role.index()];
                w.entries[s].input = domain.sample(&mut coins);
            }
        }
        (w, sub_seed(trial_seed, b"embedding-coins", 0))
    }

    pub fn slots(&self) -> (usize, usize) {
        (self.edge, (self.edge + 1) % self.ring.len())
    }
}

impl AdversaryFactory for EmbeddingFactory {
    fn name(&self) -> String {
        let (x, y) = self.slots();
        format!("embedding[{}-{}]", self.ring.slot(x), self.ring.slot(y))
    }

    fn instantiate(&self, spec: &ProtocolSpec, trial_seed: u64) -> Result<TrialSetup> {
        let (w, coin_seed) = self.sample_w(trial_seed);
        let (x, y) = self.slots();
        let placement: BTreeMap<usize, usize> = [x, y]
            .into_iter()
            .map(|s| (self.ring.slot(s).role.index(), s))
            .collect();
        let inputs = JointInput {
            entries: (0..3)
                .map(|p| match placement.get(&p) {
                    Some(&s) => w.entries[s].clone(),
                    None => PartyInput::new(spec.domains[p].zeros(), default_label(p)),
                })
                .collect(),
        };
        let adversary =
            RingBridge::new(&self.ring, w, coin_seed, placement, None, self.online_cap)?;
        Ok(TrialSetup {
            adversary: Box::new(adversary),
            inputs,
            seed: coin_seed,
        })
    }
}

/// One factory per edge on the arc from `A¹` to the designated slot.
pub fn embedding_family(
    ring: &RingNetwork,
    honest_slots: Vec<usize>,
    randomize: bool,
    online_cap: u32,
) -> Vec<EmbeddingFactory> {
    (0..ring.designated())
        .map(|e| EmbeddingFactory::new(ring, e, honest_slots.clone(), randomize, online_cap))
        .collect()
}

/// Inconsistency of the embedding family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub per_edge: Vec<ConsistencyEstimate>,
    /// Largest per-edge estimate.
    pub delta_hat: f64,
    /// Standard error of the largest estimate.
    pub sigma: f64,
    pub m: usize,
}

/// Measures `δ̂` on the ring of `m` copies of `spec3`, with the honest slots
/// of the attack corrupting `corrupted`.
pub fn estimate_delta(
    spec3: &ProtocolSpec,
    m: usize,
    corrupted: &BTreeSet<usize>,
    honest_inputs: HonestInputs,
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<DeltaEstimate> {
    let ring = build_ring(spec3, m)?;
    let slots = honest_placement(&ring, corrupted)?.into_values().collect();
    let family = embedding_family(
        &ring,
        slots,
        honest_inputs == HonestInputs::Random,
        spec3.default_max_rounds(),
    );
    let refs: Vec<&dyn AdversaryFactory> = family.iter().map(|f| f as _).collect();
    let per_edge = estimate_consistency(spec3, &refs, trials, seed, jobs)?;
    let worst = per_edge
        .iter()
        .max_by(|a, b| a.delta_hat.estimate.total_cmp(&b.delta_hat.estimate))
        .expect("family is nonempty");
    Ok(DeltaEstimate {
        delta_hat: worst.delta_hat.estimate,
        sigma: worst.delta_hat.sigma,
        per_edge,
        m,
    })
}

/// `success ≥ 1 − (3m/2 + 1)·δ̂ − 3σ`, where `σ` combines the standard errors
/// of the success rate and of the scaled `δ̂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackBound {
    pub coefficient: f64,
    pub delta_hat: f64,
    pub sigma: f64,
    pub lower_bound: f64,
    pub success_rate: f64,
    pub margin: f64,
    pub holds: bool,
    /// The bound is at most 0, so it holds without saying anything.
    pub vacuous: bool,
}

impl AttackBound {
    pub fn new(stats: &AttackStats, delta: &DeltaEstimate) -> Self {
        let coefficient = (3 * delta.m / 2 + 1) as f64;
        let sigma = (stats.success.sigma.powi(2) + (coefficient * delta.sigma).powi(2)).sqrt();
        let lower_bound = 1.0 - coefficient * delta.delta_hat - 3.0 * sigma;
        let success_rate = stats.success.estimate;
        AttackBound {
            coefficient,
            delta_hat: delta.delta_hat,
            sigma,
            lower_bound,
            success_rate,
            margin: success_rate - lower_bound,
            holds: success_rate >= lower_bound,
            vacuous: lower_bound <= 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::run_honest;
    use crate::ring::{emulate_ring, ring_size_for};
    use crate::zoo;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn constant_attack_always_succeeds() {
        for (n, t, c) in [(3, 1, 0u8), (3, 1, 7), (5, 2, 0), (5, 2, 7)] {
            let spec = zoo::constant(c, n);
            let stats =
                run_attack_trials(&spec, t, &set(&[n - 1]), &AttackOptions::strict(), 50, 3, 1)
                    .unwrap();
            assert_eq!(stats.success.hits, 50, "n={n} c={c}");
            assert_eq!(
                stats.y_star_histogram.keys().collect::<Vec<_>>(),
                [&format!("{c:02x}")]
            );
        }
    }

    #[test]
    fn y_star_does_not_depend_on_corrupted_role() {
        let spec = zoo::echo_xor(2, 3);
        for seed in 0..5 {
            let a = attack_n_party(&spec, 1, &set(&[2]), seed, Variant::Strict, None).unwrap();
            let b = attack_n_party(&spec, 1, &set(&[0]), seed, Variant::Strict, None).unwrap();
            assert_eq!(a.phase1.y_star, b.phase1.y_star);
        }
    }

    #[test]
    fn announcement_precedes_interaction() {
        let spec = zoo::echo_xor(2, 3);
        let mut attack = attack_n_party(&spec, 1, &set(&[2]), 4, Variant::Strict, None).unwrap();
        let adv = attack.adversary.as_mut().unwrap();
        let r = run_with_adversary(&spec, adv.as_mut(), &spec.random_inputs(1), 2, 12).unwrap();
        assert_eq!(r.announcement, attack.phase1.y_star);
    }

    /// Real parties placed on a ring edge see exactly what the two ring slots
    /// see when the ring runs on the same `w` and coins.
    #[test]
    fn embedding_reproduces_ring_views() {
        for spec in [zoo::echo_xor(2, 3), zoo::xor_exchange(3), zoo::fair_coin(3)] {
            let m = ring_size_for(spec.bound.q());
            let ring = build_ring(&spec, m).unwrap();
            let family = embedding_family(&ring, vec![0, 1], true, 12);
            for (k, factory) in family.iter().enumerate() {
                let tseed = 100 + k as u64;
                let (w, coin_seed) = factory.sample_w(tseed);
                let ring_run = emulate_ring(&ring, &w, 12, coin_seed).unwrap();
                let mut setup = factory.instantiate(&spec, tseed).unwrap();
                let real = run_with_adversary(
                    &spec,
                    setup.adversary.as_mut(),
                    &setup.inputs,
                    setup.seed,
                    12,
                )
                .unwrap();
                let (x, y) = factory.slots();
                let (px, py) = (ring.slot(x).role.index(), ring.slot(y).role.index());
                assert_eq!(real.statuses[px], ring_run.statuses[x]);
                assert_eq!(real.statuses[py], ring_run.statuses[y]);
                // messages received by the pair, keyed by (round, sender role, receiver)
                let view = |records: Vec<(u32, usize, usize, Vec<u8>)>| {
                    let mut v = records;
                    v.sort();
                    v
                };
                let ring_view = view(
                    ring_run
                        .transcript
                        .records
                        .iter()
                        .filter(|r| r.to == x || r.to == y)
                        .map(|r| {
                            let to = if r.to == x { px } else { py };
                            (
                                r.round,
                                ring.slot(r.from).role.index(),
                                to,
                                r.payload.clone(),
                            )
                        })
                        .collect(),
                );
                let real_view = view(
                    real.transcript
                        .records
                        .iter()
                        .filter(|r| r.to == px || r.to == py)
                        .map(|r| (r.round, r.from, r.to, r.payload.clone()))
                        .collect(),
                );
                assert_eq!(ring_view, real_view, "{} edge {k}", spec.name);
            }
        }
    }

    #[test]
    fn xor_pair_disagreement_matches_ring_neighbours() {
        let spec = zoo::xor_exchange(3);
        let ring = build_ring(&spec, 4).unwrap();
        let factory = EmbeddingFactory::new(&ring, 1, vec![0, 1], true, 8);
        let trials = 1000;
        let (mut pair, mut slots) = (0, 0);
        for i in 0..trials {
            let tseed = crate::stats::trial_seed(9, i);
            let (w, coin_seed) = factory.sample_w(tseed);
            let run = emulate_ring(&ring, &w, 4, coin_seed).unwrap();
            slots += u64::from(run.statuses[1] != run.statuses[2]);
            let mut setup = factory.instantiate(&spec, tseed).unwrap();
            let r = run_with_adversary(
                &spec,
                setup.adversary.as_mut(),
                &setup.inputs,
                setup.seed,
                4,
            )
            .unwrap();
            pair += u64::from(r.statuses[1] != r.statuses[2]);
        }
        assert_eq!(pair, slots);
    }

    #[test]
    fn honest_run_baseline_for_fused_attack() {
        let spec = zoo::constant(0, 5);
        let r = run_honest(&spec, &spec.random_inputs(1), 1, 4).unwrap();
        assert!(r
            .statuses
            .iter()
            .all(|s| s.outcome() == Some(&Outcome::byte(0))));
        let stats =
            run_attack_trials(&spec, 2, &set(&[2]), &AttackOptions::strict(), 20, 1, 2).unwrap();
        assert_eq!(stats.success.hits, 20);
    }

    #[test]
    fn expected_variant_keeps_designated_slot_within_budget() {
        let spec = zoo::geom_halt_window(4, 3).unwrap();
        let mut checked = 0;
        for seed in 0..40 {
            let phase1 = crate::ring::phase1_expected(&spec, 3, seed).unwrap();
            if phase1.aborted {
                continue;
            }
            let ring = build_ring(&spec, phase1.m).unwrap();
            let mut bridge = attack_adversary(&ring, &phase1, &set(&[2]), 256).unwrap();
            let r = run_with_adversary(&spec, &mut bridge, &spec.random_inputs(seed), seed, 256)
                .unwrap();
            let star = ring.designated();
            assert!(bridge.last_active_round(star) <= phase1.round_budget);
            // the run stops once every honest party halted, possibly before P* did
            if let Some((outcome, round)) = bridge.slot_outcome(star).cloned() {
                assert!(round <= phase1.round_budget);
                assert_eq!(Some(outcome), phase1.y_star);
                checked += 1;
            } else {
                assert!(r.rounds < phase1.round_budget);
            }
        }
        assert!(checked > 5, "{checked}");
    }

    #[test]
    fn six_parties_without_honest_majority() {
        let spec = zoo::constant(3, 6);
        let stats =
            run_attack_trials(&spec, 3, &set(&[0]), &AttackOptions::strict(), 10, 2, 1).unwrap();
        assert_eq!(stats.success.hits, 10);
    }
}
