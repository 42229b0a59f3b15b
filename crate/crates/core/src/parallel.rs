//! Trial-parallel execution with per-trial derived seeds.
//!
//! Results always come back in trial order, so aggregates do not depend on
//! the number of workers.

use rayon::prelude::*;

use crate::stats::trial_seed;

/// Runs `trials` independent trials. Trial `i` receives `trial_seed(master, i)`.
/// `jobs <= 1` runs sequentially on the calling thread.
pub fn run_trials<T, F>(trials: usize, master: u64, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    if jobs <= 1 {
        return (0..trials)
            .map(|i| f(i, trial_seed(master, i as u64)))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("failed to build worker pool");
    pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| f(i, trial_seed(master, i as u64)))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_sequential() {
        let seq = run_trials(64, 9, 1, |i, s| (i, s));
        let par = run_trials(64, 9, 4, |i, s| (i, s));
        assert_eq!(seq, par);
    }
}
