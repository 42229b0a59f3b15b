//! Full security for dominated functionalities from a two-threshold oracle.
//!
//! The oracle computes `f` with guaranteed output when at most `t1` parties
//! are corrupted, and lets the adversary force an all-⊥ abort when more are
//! corrupted (never more than `t2`). The wrapper runs one oracle call and
//! replaces ⊥ by the value `y*` that `n − 2t` parties can force. The
//! simulator turns a wrapper adversary into a full-ideal adversary by
//! submitting `y*`-forcing inputs whenever the emulated adversary aborts.
//!
//! The oracle is ideal, so real and ideal distributions coincide exactly.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dominance::{is_k_dominated, DominanceWitness, FunctionTable, Token};
use crate::error::{Error, Result};
use crate::stats::{statistical_distance, sub_seed};

/// Parameters of the two-threshold oracle. Default inputs are all zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdIdealConfig {
    pub t1: usize,
    pub t2: usize,
    pub defaults: Vec<u32>,
    pub f: FunctionTable,
}

impl ThresholdIdealConfig {
    /// Requires `t1 ≤ t2` and `t1 + 2·t2 < n`.
    pub fn new(f: FunctionTable, t1: usize, t2: usize) -> Result<Self> {
        let n = f.n();
        if t1 > t2 || t1 + 2 * t2 >= n {
            return Err(Error::ThresholdParameters { t1, t2, n });
        }
        Ok(ThresholdIdealConfig {
            t1,
            t2,
            defaults: vec![0; n],
            f,
        })
    }

    pub fn n(&self) -> usize {
        self.f.n()
    }
}

/// What the corrupted parties send to an ideal functionality. Missing or
/// out-of-domain inputs are replaced by the default.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdealDecision {
    Inputs(BTreeMap<usize, u64>),
    Abort,
}

/// Outputs of one ideal execution, `None` standing for ⊥.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdealExecution {
    /// The inputs `f` was evaluated on, if it was evaluated.
    pub effective_inputs: Option<Vec<u32>>,
    pub outputs: Vec<Option<Token>>,
}

fn check_sets(n: usize, honest_inputs: &[u32], corrupted: &BTreeSet<usize>) -> Result<()> {
    if honest_inputs.len() != n {
        return Err(Error::InputCount {
            expected: n,
            actual: honest_inputs.len(),
        });
    }
    if let Some(&c) = corrupted.iter().find(|&&c| c >= n) {
        return Err(Error::InvalidArgument(format!(
            "corrupted party {c} outside 0..{n}"
        )));
    }
    Ok(())
}

fn effective_inputs(
    f: &FunctionTable,
    defaults: &[u32],
    honest_inputs: &[u32],
    corrupted: &BTreeSet<usize>,
    adv_inputs: &BTreeMap<usize, u64>,
) -> Result<Vec<u32>> {
    let mut x = honest_inputs.to_vec();
    for (i, &d) in f.domains().iter().enumerate() {
        if corrupted.contains(&i) {
            x[i] = match adv_inputs.get(&i) {
                Some(&v) if v < d as u64 => v as u32,
                _ => defaults[i],
            };
        } else if x[i] >= d {
            return Err(Error::OutOfDomain {
                party: i,
                value: x[i] as u64,
                domain: d,
            });
        }
    }
    Ok(x)
}

/// Ideal computation with guaranteed output. `honest_inputs` holds one entry
/// per party; entries of corrupted parties are ignored.
pub fn full_ideal_exec(
    f: &FunctionTable,
    honest_inputs: &[u32],
    corrupted: &BTreeSet<usize>,
    adv_inputs: &BTreeMap<usize, u64>,
) -> Result<IdealExecution> {
    check_sets(f.n(), honest_inputs, corrupted)?;
    let x = effective_inputs(f, &vec![0; f.n()], honest_inputs, corrupted, adv_inputs)?;
    let y = f.eval(&x).clone();
    Ok(IdealExecution {
        effective_inputs: Some(x),
        outputs: vec![Some(y); f.n()],
    })
}

/// Two-threshold ideal computation. Requires `|I| ≤ t2`; an abort is legal
/// only when `|I| > t1` and gives every party ⊥.
pub fn threshold_ideal_exec(
    cfg: &ThresholdIdealConfig,
    honest_inputs: &[u32],
    corrupted: &BTreeSet<usize>,
    decision: &IdealDecision,
) -> Result<IdealExecution> {
    let n = cfg.n();
    check_sets(n, honest_inputs, corrupted)?;
    if corrupted.len() > cfg.t2 {
        return Err(Error::Precondition(format!(
            "{} corruptions exceed t2 = {}",
            corrupted.len(),
            cfg.t2
        )));
    }
    match decision {
        IdealDecision::Abort if corrupted.len() <= cfg.t1 => Err(Error::IllegalAbort {
            corrupted: corrupted.len(),
            t1: cfg.t1,
        }),
        IdealDecision::Abort => Ok(IdealExecution {
            effective_inputs: None,
            outputs: vec![None; n],
        }),
        IdealDecision::Inputs(adv) => {
            let x = effective_inputs(&cfg.f, &cfg.defaults, honest_inputs, corrupted, adv)?;
            let y = cfg.f.eval(&x).clone();
            Ok(IdealExecution {
                effective_inputs: Some(x),
                outputs: vec![Some(y); n],
            })
        }
    }
}

/// The wrapper protocol in the oracle-hybrid model.
#[derive(Clone, Debug)]
pub struct WrappedProtocol {
    pub n: usize,
    pub t: usize,
    pub cfg: ThresholdIdealConfig,
    pub y_star: Token,
    pub witness: DominanceWitness,
}

/// Builds the wrapper for `f` with `n/3 ≤ t < n/2`, setting `t1 = n − 2t − 1`
/// and `t2 = t`. The case `n − 2t = 1` is not supported.
pub fn wrap_dominated(f: &FunctionTable, n: usize, t: usize) -> Result<WrappedProtocol> {
    if f.n() != n {
        return Err(Error::Precondition(format!(
            "table has {} parties, wrapper asked for {n}",
            f.n()
        )));
    }
    if 3 * t < n || 2 * t >= n {
        return Err(Error::Precondition(format!(
            "the wrapper needs n/3 ≤ t < n/2, got n={n}, t={t}"
        )));
    }
    let k = n - 2 * t;
    if k == 1 {
        return Err(Error::UnsupportedSubcase(format!(
            "n − 2t = 1 (n={n}, t={t}) needs a cryptographic compiler"
        )));
    }
    let witness = is_k_dominated(f, k)?.ok_or(Error::NotDominated(k))?;
    let y_star = witness.y_star().expect("strong witness").clone();
    let cfg = ThresholdIdealConfig::new(f.clone(), k - 1, t)?;
    Ok(WrappedProtocol {
        n,
        t,
        cfg,
        y_star,
        witness,
    })
}

/// `(t1, t2)` chosen by the wrapper, or `None` when the case is unsupported.
pub fn wrapper_thresholds(n: usize, t: usize) -> Option<(usize, usize)> {
    (3 * t >= n && 2 * t < n && n - 2 * t >= 2).then(|| (n - 2 * t - 1, t))
}

/// Whether the adversary aborts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AbortRule {
    Never,
    Always,
    /// Aborts on `numerator` of `denominator` equally likely coin values.
    Coin {
        numerator: u32,
        denominator: u32,
    },
}

/// Which inputs the corrupted parties submit when they do not abort.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum InputRule {
    /// Their own inputs.
    Keep,
    /// Fixed values; missing entries fall back to the default.
    Fixed { inputs: BTreeMap<usize, u64> },
    /// Each corrupted party picks uniformly from `0..range`; values outside
    /// the domain are replaced by the default.
    Uniform { range: u32 },
}

/// A declarative adversary against the wrapper. Its randomness is a single
/// coin drawn uniformly from `0..coin_space()`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HybridAdversary {
    pub corrupted: BTreeSet<usize>,
    pub abort: AbortRule,
    pub inputs: InputRule,
}

/// What the adversary sees: its decision and the oracle's answers to the
/// corrupted parties. This is also its output.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AdversaryView {
    pub decision: IdealDecision,
    pub received: Vec<Option<Token>>,
}

/// Honest outputs (in party order) and the adversary's output.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointOutput {
    pub honest: Vec<Option<Token>>,
    pub adversary: AdversaryView,
}

impl HybridAdversary {
    pub fn new(corrupted: BTreeSet<usize>, abort: AbortRule, inputs: InputRule) -> Self {
        HybridAdversary {
            corrupted,
            abort,
            inputs,
        }
    }

    fn abort_space(&self) -> u64 {
        match self.abort {
            AbortRule::Coin { denominator, .. } => u64::from(denominator.max(1)),
            _ => 1,
        }
    }

    /// Number of equally likely coin values.
    pub fn coin_space(&self) -> Option<u64> {
        let inputs = match self.inputs {
            InputRule::Uniform { range } => {
                u64::from(range.max(1)).checked_pow(self.corrupted.len() as u32)?
            }
            _ => 1,
        };
        self.abort_space().checked_mul(inputs)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let Some(&c) = self.corrupted.iter().find(|&&c| c >= n) {
            return Err(Error::InvalidArgument(format!(
                "corrupted party {c} outside 0..{n}"
            )));
        }
        if let AbortRule::Coin {
            numerator,
            denominator,
        } = self.abort
        {
            if denominator == 0 || numerator > denominator {
                return Err(Error::InvalidArgument(format!(
                    "abort probability {numerator}/{denominator} is not in [0, 1]"
                )));
            }
        }
        if matches!(self.inputs, InputRule::Uniform { range: 0 }) {
            return Err(Error::InvalidArgument(
                "uniform input range must be positive".into(),
            ));
        }
        if self.coin_space().is_none() {
            return Err(Error::InvalidArgument(
                "adversary coin space overflows".into(),
            ));
        }
        Ok(())
    }

    /// The decision taken on coin value `coin`, given the corrupted parties'
    /// own inputs (taken from `x`).
    pub fn decide(&self, x: &[u32], coin: u64) -> IdealDecision {
        let a = self.abort_space();
        let (abort_coin, mut rest) = (coin % a, coin / a);
        let abort = match self.abort {
            AbortRule::Never => false,
            AbortRule::Always => true,
            AbortRule::Coin { numerator, .. } => abort_coin < u64::from(numerator),
        };
        if abort {
            return IdealDecision::Abort;
        }
        let inputs = match &self.inputs {
            InputRule::Keep => self
                .corrupted
                .iter()
                .map(|&i| (i, u64::from(x[i])))
                .collect(),
            InputRule::Fixed { inputs } => inputs
                .iter()
                .filter(|(i, _)| self.corrupted.contains(i))
                .map(|(&i, &v)| (i, v))
                .collect(),
            InputRule::Uniform { range } => {
                let r = u64::from(*range);
                self.corrupted
                    .iter()
                    .map(|&i| {
                        let v = rest % r;
                        rest /= r;
                        (i, v)
                    })
                    .collect()
            }
        };
        IdealDecision::Inputs(inputs)
    }
}

fn joint(
    exec_outputs: &[Option<Token>],
    honest_view: &[Option<Token>],
    corrupted: &BTreeSet<usize>,
    decision: IdealDecision,
) -> JointOutput {
    JointOutput {
        honest: (0..honest_view.len())
            .filter(|i| !corrupted.contains(i))
            .map(|i| honest_view[i].clone())
            .collect(),
        adversary: AdversaryView {
            decision,
            received: corrupted.iter().map(|&i| exec_outputs[i].clone()).collect(),
        },
    }
}

impl WrappedProtocol {
    /// One wrapper run: a single oracle call, then ⊥ is replaced by `y*`.
    pub fn run(
        &self,
        x: &[u32],
        corrupted: &BTreeSet<usize>,
        decision: &IdealDecision,
    ) -> Result<IdealExecution> {
        let mut exec = threshold_ideal_exec(&self.cfg, x, corrupted, decision)?;
        for (i, y) in exec.outputs.iter_mut().enumerate() {
            if !corrupted.contains(&i) && y.is_none() {
                *y = Some(self.y_star.clone());
            }
        }
        Ok(exec)
    }

    /// Real (hybrid) execution against `adv` on coin `coin`.
    pub fn real(&self, adv: &HybridAdversary, x: &[u32], coin: u64) -> Result<JointOutput> {
        let decision = adv.decide(x, coin);
        let oracle = threshold_ideal_exec(&self.cfg, x, &adv.corrupted, &decision)?;
        let wrapped = self.run(x, &adv.corrupted, &decision)?;
        Ok(joint(
            &oracle.outputs,
            &wrapped.outputs,
            &adv.corrupted,
            decision,
        ))
    }

    /// Inputs for the corrupted parties that force `y*`: the witness
    /// assignment on the first `n − 2t` corrupted parties, defaults elsewhere.
    pub fn forcing_inputs(&self, corrupted: &BTreeSet<usize>) -> Result<BTreeMap<usize, u64>> {
        let k = self.n - 2 * self.t;
        let subset: Vec<usize> = corrupted.iter().copied().take(k).collect();
        if subset.len() < k {
            return Err(Error::Precondition(format!(
                "forcing needs {k} corrupted parties, have {}",
                subset.len()
            )));
        }
        let entry = self
            .witness
            .forcing_for(&subset)
            .expect("witness covers every k-subset");
        Ok(entry
            .subset
            .iter()
            .zip(&entry.assignment)
            .map(|(&i, &v)| (i, u64::from(v)))
            .collect())
    }

    /// The simulator: emulates `adv` against a mock oracle and talks to the
    /// full ideal functionality.
    pub fn ideal(&self, adv: &HybridAdversary, x: &[u32], coin: u64) -> Result<JointOutput> {
        let decision = adv.decide(x, coin);
        let (mock_reply, submitted) = match &decision {
            IdealDecision::Abort => {
                if adv.corrupted.len() <= self.cfg.t1 {
                    return Err(Error::IllegalAbort {
                        corrupted: adv.corrupted.len(),
                        t1: self.cfg.t1,
                    });
                }
                (vec![None; self.n], self.forcing_inputs(&adv.corrupted)?)
            }
            IdealDecision::Inputs(inputs) => (Vec::new(), inputs.clone()),
        };
        let ideal = full_ideal_exec(&self.cfg.f, x, &adv.corrupted, &submitted)?;
        let reply = if mock_reply.is_empty() {
            ideal.outputs.clone()
        } else {
            mock_reply
        };
        Ok(joint(&reply, &ideal.outputs, &adv.corrupted, decision))
    }
}

/// How to compare the two distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CompareMode {
    /// Enumerate every coin value; the distance is exact.
    Exhaustive,
    /// Independent samples on each side.
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealIdealComparison {
    #[serde(flatten)]
    pub mode: CompareMode,
    pub distance: f64,
    /// True when the distance is computed exactly.
    pub exact: bool,
    /// Distinct joint outputs seen on either side.
    pub support: usize,
    /// Expected distance between two independent samples of one
    /// distribution of this support, a rough noise floor.
    pub noise_floor: f64,
    /// Fraction of real runs in which some honest party output ⊥.
    pub bot_rate: f64,
}

/// Distance between the joint (honest outputs, adversary output)
/// distributions of the wrapper against `adv` and of the simulator in the
/// full ideal model, on honest inputs `x`.
pub fn compare_real_ideal(
    w: &WrappedProtocol,
    adv: &HybridAdversary,
    x: &[u32],
    mode: CompareMode,
) -> Result<RealIdealComparison> {
    adv.validate(w.n)?;
    let space = adv.coin_space().expect("validated");
    let mut real: BTreeMap<JointOutput, u64> = BTreeMap::new();
    let mut ideal: BTreeMap<JointOutput, u64> = BTreeMap::new();
    let mut bots = 0u64;
    let mut total = 0u64;
    let mut tally = |r: JointOutput, i: JointOutput| {
        bots += u64::from(r.honest.iter().any(Option::is_none));
        total += 1;
        *real.entry(r).or_default() += 1;
        *ideal.entry(i).or_default() += 1;
    };
    match mode {
        CompareMode::Exhaustive => {
            for coin in 0..space {
                tally(w.real(adv, x, coin)?, w.ideal(adv, x, coin)?);
            }
        }
        CompareMode::MonteCarlo { samples, seed } => {
            let mut rr = ChaCha8Rng::seed_from_u64(sub_seed(seed, b"real", 0));
            let mut ri = ChaCha8Rng::seed_from_u64(sub_seed(seed, b"ideal", 0));
            for _ in 0..samples {
                let r = w.real(adv, x, rr.gen_range(0..space))?;
                let i = w.ideal(adv, x, ri.gen_range(0..space))?;
                tally(r, i);
            }
        }
    }
    let support = real
        .keys()
        .chain(ideal.keys())
        .collect::<BTreeSet<_>>()
        .len();
    let (exact, noise_floor) = match mode {
        CompareMode::Exhaustive => (true, 0.0),
        CompareMode::MonteCarlo { samples, .. } => (
            false,
            (support as f64 / (std::f64::consts::PI * samples.max(1) as f64)).sqrt(),
        ),
    };
    Ok(RealIdealComparison {
        mode,
        distance: statistical_distance(&real, &ideal),
        exact,
        support,
        noise_floor,
        bot_rate: bots as f64 / total.max(1) as f64,
    })
}

/// Every decision available to an adversary corrupting `corrupted`: an
/// abort when legal, and every input vector over `0..=max_domain`
/// (the top value is out of domain).
pub fn decision_space(
    cfg: &ThresholdIdealConfig,
    corrupted: &BTreeSet<usize>,
) -> Vec<IdealDecision> {
    let mut out = Vec::new();
    if corrupted.len() > cfg.t1 {
        out.push(IdealDecision::Abort);
    }
    let parties: Vec<usize> = corrupted.iter().copied().collect();
    let radix: Vec<u64> = parties
        .iter()
        .map(|&i| u64::from(cfg.f.domains()[i]) + 1)
        .collect();
    let mut digits = vec![0u64; parties.len()];
    loop {
        out.push(IdealDecision::Inputs(
            parties
                .iter()
                .copied()
                .zip(digits.iter().copied())
                .collect(),
        ));
        let Some(i) = (0..digits.len()).rev().find(|&i| digits[i] + 1 < radix[i]) else {
            return out;
        };
        digits[i] += 1;
        for d in &mut digits[i + 1..] {
            *d = 0;
        }
    }
}
