//! Deterministic Monte-Carlo plumbing. Each shard draws from its own
//! ChaCha stream keyed by `(seed, shard)`, and shard results are reduced
//! in shard order, so parallel runs are bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 1_000_000;
const SHARD_SIZE: usize = 65_536;

/// Seed from `HESSVAL_SEED` when set and parseable, else `fallback`.
pub fn seed_from_env(fallback: u64) -> u64 {
    std::env::var("HESSVAL_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(fallback)
}

pub fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// Runs `per_sample` on `samples` uniform points of `[0,1)^dim` and returns
/// the per-shard accumulators in shard order.
pub fn sharded<A, F>(seed: u64, samples: usize, dim: usize, init: A, per_sample: F) -> Vec<A>
where
    A: Clone + Send + Sync,
    F: Fn(&mut A, &[f64]) + Sync,
{
    let shards = samples.div_ceil(SHARD_SIZE);
    (0..shards)
        .into_par_iter()
        .map(|k| {
            let mut rng = shard_rng(seed, k as u64);
            let mut acc = init.clone();
            let count = SHARD_SIZE.min(samples - k * SHARD_SIZE);
            let mut u = vec![0.0; dim];
            for _ in 0..count {
                for v in u.iter_mut() {
                    *v = rng.random::<f64>();
                }
                per_sample(&mut acc, &u);
            }
            acc
        })
        .collect()
}

/// Hit count of a membership test on a uniform sample of `[0,1)^dim`.
pub fn hit_count<F>(seed: u64, samples: usize, dim: usize, hit: F) -> usize
where
    F: Fn(&[f64]) -> bool + Sync,
{
    sharded(seed, samples, dim, 0usize, |acc, u| {
        if hit(u) {
            *acc += 1;
        }
    })
    .into_iter()
    .sum()
}

/// Volume estimate `(value, standard error)` from a hit fraction.
pub fn volume_from_hits(hits: usize, samples: usize, box_volume: f64) -> (f64, f64) {
    let p = hits as f64 / samples as f64;
    (box_volume * p, box_volume * (p * (1.0 - p) / samples as f64).sqrt())
}
