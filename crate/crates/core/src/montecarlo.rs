//! Deterministic, scheduling-independent Monte-Carlo path loops.
//!
//! Path `i` draws from its own ChaCha8 stream seeded with
//! `path_seed(master, i)`, and per-path results are reduced in path-index
//! order, so estimates are bitwise identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest path count accepted by the estimators.
pub const MIN_PATHS: usize = 100;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed of path `index`: `mix64(master + (index + 1) * 0x9e3779b97f4a7c15)`
/// with wrapping arithmetic.
pub fn path_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn path_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(path_seed(master, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub paths: usize,
    pub seed: u64,
    /// Worker cap; 0 or 1 runs on the calling thread.
    pub threads: usize,
}

impl McSettings {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            threads: 1,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths < MIN_PATHS {
            return Err(Error::Config {
                key: "paths".into(),
                expected: format!("at least {MIN_PATHS} paths, got {}", self.paths),
            });
        }
        Ok(())
    }
}

/// Evaluates `f(index, rng)` for every path, returning results in index order.
pub fn run_paths<T, F>(settings: &McSettings, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    let n = settings.paths as u64;
    let seed = settings.seed;
    if settings.threads <= 1 {
        return (0..n).map(|i| f(i, &mut path_rng(seed, i))).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| f(i, &mut path_rng(seed, i)))
            .collect()
    })
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Summary {
    /// Two-pass mean/variance in slice order.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }

    /// Summary of the values multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            se: self.se * factor.abs(),
            n: self.n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..1000).map(|i| path_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), a.len());
        assert_eq!(path_seed(7, 3), a[3]);
        assert_ne!(path_seed(8, 3), a[3]);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let f = |_i: u64, rng: &mut ChaCha8Rng| Ok(rng.random::<f64>());
        let one = run_paths(&McSettings::new(500, 42), f).unwrap();
        let four = run_paths(&McSettings::new(500, 42).with_threads(4), f).unwrap();
        assert_eq!(one, four);
        let s1 = Summary::of(&one);
        let s4 = Summary::of(&four);
        assert_eq!(s1.mean.to_bits(), s4.mean.to_bits());
        assert_eq!(s1.se.to_bits(), s4.se.to_bits());
    }

    #[test]
    fn summary_values() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(Summary::of(&[0.0; 10]).se, 0.0);
    }

    #[test]
    fn too_few_paths_rejected() {
        assert!(McSettings::new(99, 1).validate().is_err());
        assert!(McSettings::new(100, 1).validate().is_ok());
    }
}
