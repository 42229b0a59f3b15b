//! Coin-flipping bias: measurement and the forcing attack.
//!
//! The forcing attack reruns the ring phase 1 with fresh seeds until the
//! announced value differs from an excluded bit, giving up after `kappa`
//! attempts. Distances from the uniform bit count every non-bit output
//! (including ⊥) in a separate bucket.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::{
    check_consistency, run_honest, run_with_adversary, AdversaryFactory, ExecutionResult, Passive,
};
use crate::parallel::run_trials;
use crate::protocol::{Outcome, ProtocolSpec};
use crate::ring::{attack_n_party, estimate_delta, HonestInputs, NPartyAttack, Variant};
use crate::stats::{binomial_sigma, sub_seed, Proportion, Z95};

/// Minimum number of trials for a bias measurement.
pub const MIN_TRIALS: usize = 1000;

/// Counts of the common honest output over consistent runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitCounts {
    pub zero: u64,
    pub one: u64,
    pub other: u64,
}

impl BitCounts {
    pub fn total(&self) -> u64 {
        self.zero + self.one + self.other
    }

    fn add(&mut self, outcome: &Outcome) {
        match outcome.as_bit() {
            Some(0) => self.zero += 1,
            Some(_) => self.one += 1,
            None => self.other += 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitDistribution {
    pub zero: f64,
    pub one: f64,
    pub other: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub adversary: String,
    pub trials: u64,
    /// Runs whose honest outputs agree; the distribution is over these.
    pub consistent: u64,
    /// Runs with disagreeing or missing honest outputs.
    pub inconsistent: u64,
    pub counts: BitCounts,
    pub distribution: BitDistribution,
    /// Statistical distance from a uniform bit.
    pub distance: f64,
    /// Conservative standard error of `distance`.
    pub sigma: f64,
    pub ci95: (f64, f64),
    /// The announced value when every attacked run used the same one.
    pub y_star: Option<Outcome>,
}

impl BiasReport {
    fn from_counts(
        adversary: String,
        trials: u64,
        counts: BitCounts,
        y_star: Option<Outcome>,
    ) -> Self {
        let consistent = counts.total();
        let n = consistent.max(1) as f64;
        let distribution = BitDistribution {
            zero: counts.zero as f64 / n,
            one: counts.one as f64 / n,
            other: counts.other as f64 / n,
        };
        let distance = uniform_distance(&distribution);
        let sigma = [distribution.zero, distribution.one, distribution.other]
            .into_iter()
            .map(|p| binomial_sigma(p, consistent))
            .fold(0.0, f64::max);
        BiasReport {
            adversary,
            trials,
            consistent,
            inconsistent: trials - consistent,
            counts,
            distribution,
            distance,
            sigma,
            ci95: (
                (distance - Z95 * sigma).max(0.0),
                (distance + Z95 * sigma).min(1.0),
            ),
            y_star,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "value,count,frequency\n0,{},{}\n1,{},{}\nother,{},{}\n",
            self.counts.zero,
            self.distribution.zero,
            self.counts.one,
            self.distribution.one,
            self.counts.other,
            self.distribution.other
        )
    }
}

/// Distance of `(p0, p1, p_other)` from the uniform bit.
pub fn uniform_distance(d: &BitDistribution) -> f64 {
    0.5 * ((d.zero - 0.5).abs() + (d.one - 0.5).abs() + d.other)
}

fn common_output(result: &ExecutionResult) -> Option<Outcome> {
    let honest = result.honest();
    match check_consistency(result, &honest) {
        Ok(true) => honest
            .iter()
            .next()
            .and_then(|&i| result.outcome(i).cloned()),
        _ => None,
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::Precondition(format!(
            "bias measurement needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    Ok(())
}

/// Distribution of the common honest output, honest or against `adv`.
pub fn measure_bias(
    spec: &ProtocolSpec,
    adv: Option<&dyn AdversaryFactory>,
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<BiasReport> {
    check_trials(trials)?;
    let max_rounds = spec.default_max_rounds();
    let results = run_trials(trials, seed, jobs, |_, tseed| -> Result<Option<Outcome>> {
        let result = match adv {
            None => run_honest(
                spec,
                &spec.random_inputs(sub_seed(tseed, b"inputs", 0)),
                sub_seed(tseed, b"coins", 0),
                max_rounds,
            )?,
            Some(factory) => {
                let mut setup = factory.instantiate(spec, tseed)?;
                run_with_adversary(
                    spec,
                    setup.adversary.as_mut(),
                    &setup.inputs,
                    setup.seed,
                    max_rounds,
                )?
            }
        };
        Ok(common_output(&result))
    });
    let mut counts = BitCounts::default();
    for r in results {
        if let Some(out) = r? {
            counts.add(&out);
        }
    }
    let name = adv.map_or_else(|| "honest".to_string(), |f| f.name());
    Ok(BiasReport::from_counts(name, trials as u64, counts, None))
}

/// Result of the forcing attack's offline phase.
pub enum BiasAttack {
    /// `attempts` phase-1 runs were needed; the last announced a value other
    /// than the excluded one.
    Forcing {
        attack: Box<NPartyAttack>,
        attempts: u32,
    },
    /// Every one of the `kappa` attempts announced the excluded value.
    Abort { attempts: u32 },
}

impl BiasAttack {
    pub fn is_abort(&self) -> bool {
        matches!(self, BiasAttack::Abort { .. })
    }

    pub fn y_star(&self) -> Option<&Outcome> {
        match self {
            BiasAttack::Forcing { attack, .. } => attack.phase1.y_star.as_ref(),
            BiasAttack::Abort { .. } => None,
        }
    }
}

/// Budget `t = ⌈n/3⌉` used by the forcing attack.
pub fn coin_budget(n: usize) -> usize {
    n.div_ceil(3)
}

fn variant_for(spec: &ProtocolSpec, kappa: u32) -> Variant {
    if spec.bound.is_strict() {
        Variant::Strict
    } else {
        Variant::Expected { z: kappa.max(1) }
    }
}

/// Repeats phase 1 with derived seeds until the announced value is not the
/// bit `exclude`, for at most `kappa` attempts.
pub fn bias_attack(
    spec: &ProtocolSpec,
    corrupted: &BTreeSet<usize>,
    exclude: u8,
    kappa: u32,
    seed: u64,
) -> Result<BiasAttack> {
    if kappa == 0 {
        return Err(Error::InvalidArgument("kappa must be at least 1".into()));
    }
    let t = coin_budget(spec.n());
    let variant = variant_for(spec, kappa);
    for attempt in 0..kappa {
        let attack = attack_n_party(
            spec,
            t,
            corrupted,
            sub_seed(seed, b"bias-attempt", attempt as u64),
            variant,
            None,
        )?;
        let excluded = match &attack.phase1.y_star {
            Some(y) => y.as_bit() == Some(exclude),
            None => true,
        };
        if !excluded {
            return Ok(BiasAttack::Forcing {
                attack: Box::new(attack),
                attempts: attempt + 1,
            });
        }
    }
    Ok(BiasAttack::Abort { attempts: kappa })
}

/// The bit that phase 1 announces least often over `pilot` runs (ties pick 0).
pub fn minority_value(
    spec: &ProtocolSpec,
    corrupted: &BTreeSet<usize>,
    pilot: usize,
    seed: u64,
) -> Result<u8> {
    let t = coin_budget(spec.n());
    let variant = variant_for(spec, 1);
    let mut ones = 0usize;
    let mut zeros = 0usize;
    for i in 0..pilot {
        let a = attack_n_party(
            spec,
            t,
            corrupted,
            sub_seed(seed, b"pilot", i as u64),
            variant,
            None,
        )?;
        match a.phase1.y_star.as_ref().and_then(Outcome::as_bit) {
            Some(0) => zeros += 1,
            Some(_) => ones += 1,
            None => {}
        }
    }
    Ok(u8::from(ones < zeros))
}

/// Outcome of running the forcing attack in many independent trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcedRun {
    pub report: BiasReport,
    pub aborts: Proportion,
    /// Trials in which every honest party output the announced value.
    pub forced: Proportion,
}

/// Each trial runs [`bias_attack`] and then the online phase; aborted
/// trials fall back to a passive corruption.
pub fn run_forced(
    spec: &ProtocolSpec,
    corrupted: &BTreeSet<usize>,
    exclude: u8,
    kappa: u32,
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<ForcedRun> {
    check_trials(trials)?;
    let max_rounds = spec.default_max_rounds();
    let results = run_trials(trials, seed, jobs, |_, tseed| {
        let inputs = spec.random_inputs(sub_seed(tseed, b"honest-inputs", 0));
        let coins = sub_seed(tseed, b"honest-coins", 0);
        let attack = bias_attack(spec, corrupted, exclude, kappa, sub_seed(tseed, b"bias", 0))?;
        let y_star = attack.y_star().cloned();
        let result = match attack {
            BiasAttack::Forcing { mut attack, .. } => {
                let adv = attack.adversary.as_mut().expect("phase 1 succeeded");
                run_with_adversary(spec, adv.as_mut(), &inputs, coins, max_rounds)?
            }
            BiasAttack::Abort { .. } => {
                let mut adv = Passive::new(spec, corrupted.clone(), &inputs, coins);
                run_with_adversary(spec, &mut adv, &inputs, coins, max_rounds)?
            }
        };
        Ok::<_, Error>((y_star, common_output(&result)))
    });
    let mut counts = BitCounts::default();
    let (mut aborts, mut forced) = (0u64, 0u64);
    let mut stars = BTreeSet::new();
    for r in results {
        let (y_star, out) = r?;
        match &y_star {
            None => aborts += 1,
            Some(y) => {
                stars.insert(y.clone());
            }
        }
        if let Some(out) = out {
            forced += u64::from(y_star.as_ref() == Some(&out));
            counts.add(&out);
        }
    }
    let single = (stars.len() == 1).then(|| stars.into_iter().next().expect("one value"));
    let name = format!("bias-attack{corrupted:?} exclude={exclude} kappa={kappa}");
    Ok(ForcedRun {
        report: BiasReport::from_counts(name, trials as u64, counts, single),
        aborts: Proportion::new(aborts, trials as u64),
        forced: Proportion::new(forced, trials as u64),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundVerdict {
    Pass,
    Fail,
    /// The lower bound is at most 0, so the check carries no information.
    Inconclusive,
}

/// The forced distance checked against `½ − 2^{−κ} − (3m/2+1)·δ̂ − 3σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoBiasVerification {
    pub kappa: u32,
    pub exclude: u8,
    pub corrupted: BTreeSet<usize>,
    pub forced: ForcedRun,
    pub m: usize,
    pub delta_hat: f64,
    pub delta_sigma: f64,
    pub coefficient: f64,
    pub sigma: f64,
    pub lower_bound: f64,
    pub distance_holds: bool,
    /// `2^{−κ} + 3σ` with `σ` the abort-rate standard error at `2^{−κ}`.
    pub abort_limit: f64,
    pub abort_holds: bool,
    pub verdict: BoundVerdict,
}

/// Runs the forcing attack, measures `δ̂` on the induced embedding family
/// and checks the distance bound. `exclude = None` excludes the value phase 1
/// announces less often.
pub fn verify_no_nontrivial_bias(
    spec: &ProtocolSpec,
    corrupted: &BTreeSet<usize>,
    exclude: Option<u8>,
    kappa: u32,
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<NoBiasVerification> {
    let exclude = match exclude {
        Some(b) => b,
        None => minority_value(spec, corrupted, 200, sub_seed(seed, b"polarity", 0))?,
    };
    let forced = run_forced(
        spec,
        corrupted,
        exclude,
        kappa,
        trials,
        sub_seed(seed, b"forced", 0),
        jobs,
    )?;
    let probe = attack_n_party(
        spec,
        coin_budget(spec.n()),
        corrupted,
        sub_seed(seed, b"probe", 0),
        variant_for(spec, kappa),
        None,
    )?;
    let corrupted3 = if probe.partition.is_some() {
        BTreeSet::from([2])
    } else {
        corrupted.clone()
    };
    let delta = estimate_delta(
        &probe.spec3,
        probe.phase1.m,
        &corrupted3,
        HonestInputs::Random,
        trials,
        sub_seed(seed, b"delta", 0),
        jobs,
    )?;
    let coefficient = (3 * delta.m / 2 + 1) as f64;
    let sigma = (forced.report.sigma.powi(2) + (coefficient * delta.sigma).powi(2)).sqrt();
    let two_k = 0.5f64.powi(kappa as i32);
    let lower_bound = 0.5 - two_k - coefficient * delta.delta_hat - 3.0 * sigma;
    let distance_holds = forced.report.distance >= lower_bound;
    let abort_limit = two_k + 3.0 * binomial_sigma(two_k, trials as u64);
    let abort_holds = forced.aborts.estimate <= abort_limit;
    let verdict = if !distance_holds || !abort_holds {
        BoundVerdict::Fail
    } else if lower_bound <= 0.0 {
        BoundVerdict::Inconclusive
    } else {
        BoundVerdict::Pass
    };
    Ok(NoBiasVerification {
        kappa,
        exclude,
        corrupted: corrupted.clone(),
        forced,
        m: delta.m,
        delta_hat: delta.delta_hat,
        delta_sigma: delta.sigma,
        coefficient,
        sigma,
        lower_bound,
        distance_holds,
        abort_limit,
        abort_holds,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    fn one() -> BTreeSet<usize> {
        BTreeSet::from([2])
    }

    #[test]
    fn distance_arithmetic() {
        let d = |zero, one, other| uniform_distance(&BitDistribution { zero, one, other });
        assert_eq!(d(0.5, 0.5, 0.0), 0.0);
        assert_eq!(d(1.0, 0.0, 0.0), 0.5);
        assert_eq!(d(0.0, 0.0, 1.0), 1.0);
        assert!((d(0.25, 0.25, 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn honest_fair_coin_is_close_to_uniform() {
        let r = measure_bias(&zoo::fair_coin(3), None, 10_000, 1, 1).unwrap();
        assert_eq!(r.consistent, 10_000);
        assert!(r.distance <= 0.02, "{r:?}");
        let total = r.distribution.zero + r.distribution.one + r.distribution.other;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_coin_is_a_point_mass() {
        let r = measure_bias(&zoo::constant(0, 3), None, 1000, 1, 1).unwrap();
        assert_eq!(r.distance, 0.5);
        assert!(measure_bias(&zoo::constant(0, 3), None, 10, 1, 1).is_err());
    }

    #[test]
    fn constant_attack_outcomes() {
        let spec = zoo::constant(1, 3);
        let a = bias_attack(&spec, &one(), 0, 10, 4).unwrap();
        assert!(matches!(a, BiasAttack::Forcing { attempts: 1, .. }));
        assert_eq!(a.y_star(), Some(&Outcome::byte(1)));
        let z = bias_attack(&zoo::constant(0, 3), &one(), 0, 10, 4).unwrap();
        assert!(matches!(z, BiasAttack::Abort { attempts: 10 }));
    }

    #[test]
    fn fair_coin_attempts_are_geometric() {
        let spec = zoo::fair_coin(3);
        let mut total = 0u32;
        let runs = 400;
        for s in 0..runs {
            match bias_attack(&spec, &one(), 0, 30, s).unwrap() {
                BiasAttack::Forcing { attempts, .. } => total += attempts,
                BiasAttack::Abort { .. } => panic!("30 zero announcements in a row"),
            }
        }
        let mean = f64::from(total) / runs as f64;
        assert!((mean - 2.0).abs() < 0.3, "mean attempts {mean}");
    }

    #[test]
    fn forced_constant_coin() {
        let f = run_forced(&zoo::constant(1, 3), &one(), 0, 10, 1000, 2, 1).unwrap();
        assert_eq!(f.report.distance, 0.5);
        assert_eq!(f.forced.hits, 1000);
        assert_eq!(f.aborts.hits, 0);
        assert_eq!(f.report.y_star, Some(Outcome::byte(1)));
        let z = run_forced(&zoo::constant(0, 3), &one(), 0, 4, 1000, 2, 1).unwrap();
        assert_eq!(z.aborts.hits, 1000);
    }

    #[test]
    fn minority_of_a_constant() {
        assert_eq!(
            minority_value(&zoo::constant(1, 3), &one(), 20, 0).unwrap(),
            0
        );
        assert_eq!(
            minority_value(&zoo::constant(0, 3), &one(), 20, 0).unwrap(),
            1
        );
    }

    #[test]
    fn verification_of_constant_coin_passes() {
        let v =
            verify_no_nontrivial_bias(&zoo::constant(1, 3), &one(), None, 10, 1000, 3, 1).unwrap();
        assert_eq!(v.delta_hat, 0.0);
        assert_eq!(v.forced.report.distance, 0.5);
        assert_eq!(v.verdict, BoundVerdict::Pass);
    }

    #[test]
    fn xor_coin_bound_degenerates() {
        let v =
            verify_no_nontrivial_bias(&zoo::xor_exchange(3), &one(), None, 10, 1000, 3, 1).unwrap();
        assert!(v.delta_hat > 0.1);
        assert_eq!(v.verdict, BoundVerdict::Inconclusive);
    }
}
