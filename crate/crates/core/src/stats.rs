//! Small statistics helpers shared by the Monte-Carlo experiments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// z-score of a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Standard deviation of a binomial proportion estimate.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// A proportion with its Wilson interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci95: (f64, f64),
    pub sigma: f64,
}

impl Proportion {
    pub fn new(hits: u64, trials: u64) -> Self {
        let estimate = if trials == 0 {
            0.0
        } else {
            hits as f64 / trials as f64
        };
        Proportion {
            hits,
            trials,
            estimate,
            ci95: wilson_interval(hits, trials, Z95),
            sigma: binomial_sigma(estimate, trials),
        }
    }
}

/// Stable per-trial seed: the first eight bytes of
/// `SHA-256("ringbreak/trial" || master || index)`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    sub_seed(master, b"trial", index)
}

/// Stable seed derived from a master seed, a purpose tag and an index.
pub fn sub_seed(master: u64, tag: &[u8], index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"ringbreak/");
    hasher.update(tag);
    hasher.update(master.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Statistical distance between two empirical distributions given as counts.
pub fn statistical_distance<K: Ord>(left: &BTreeMap<K, u64>, right: &BTreeMap<K, u64>) -> f64 {
    let left_total: u64 = left.values().sum();
    let right_total: u64 = right.values().sum();
    if left_total == 0 || right_total == 0 {
        return if left_total == right_total { 0.0 } else { 1.0 };
    }
    let mut sum = 0.0;
    for (key, &count) in left {
        let other = right.get(key).copied().unwrap_or(0);
        sum += (count as f64 / left_total as f64 - other as f64 / right_total as f64).abs();
    }
    for (key, &count) in right {
        if !left.contains_key(key) {
            sum += count as f64 / right_total as f64;
        }
    }
    sum / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, Z95);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson_interval(0, 1000, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn wilson_matches_reference_value() {
        // 50 of 100 at 95%: centre 0.5, half-width 0.0961685 (statsmodels wilson)
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo - 0.403_831_5).abs() < 1e-6, "{lo}");
        assert!((hi - 0.596_168_5).abs() < 1e-6, "{hi}");
    }

    #[test]
    fn trial_seeds_are_stable_and_distinct() {
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(7, 4));
        assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
    }

    #[test]
    fn distance_of_identical_and_disjoint() {
        let a: BTreeMap<u8, u64> = [(0, 5), (1, 5)].into_iter().collect();
        let b: BTreeMap<u8, u64> = [(0, 50), (1, 50)].into_iter().collect();
        assert_eq!(statistical_distance(&a, &b), 0.0);
        let c: BTreeMap<u8, u64> = [(2, 1)].into_iter().collect();
        assert_eq!(statistical_distance(&a, &c), 1.0);
    }
}
