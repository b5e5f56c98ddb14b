//! Trajectory batch execution with reproducible per-trajectory RNG
//! streams.
//!
//! Every trajectory gets its own ChaCha stream derived from `(seed,
//! stream index)`, so results are bit-identical regardless of the worker
//! count or whether the rayon path is enabled. Stream 0 is reserved for
//! non-trajectory draws (e.g. pooled Monte Carlo sampling); trajectories
//! use streams `1..=n`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// The RNG for one reproducible stream of a seeded experiment.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f(trajectory_index, rng)` for indices `0..n`, sequentially.
/// Output order follows the trajectory index.
pub fn run_trajectories_seq<T, F>(n: u64, seed: u64, f: F) -> Vec<T>
where
    F: Fn(u64, ChaCha8Rng) -> T,
{
    (0..n).map(|i| f(i, trajectory_rng(seed, i + 1))).collect()
}

/// Runs trajectories on the rayon pool when the `parallel` feature is
/// enabled, falling back to the sequential path otherwise. Output order
/// follows the trajectory index either way.
#[cfg(feature = "parallel")]
pub fn run_trajectories<T, F>(n: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, ChaCha8Rng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| f(i, trajectory_rng(seed, i + 1)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_trajectories<T, F>(n: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, ChaCha8Rng) -> T + Sync,
{
    run_trajectories_seq(n, seed, f)
}
