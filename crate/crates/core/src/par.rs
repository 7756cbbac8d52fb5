//! Per-path deterministic substreams and the ensemble map.
//!
//! Path `i` always draws from `ChaCha8(seed)` on stream `i`, so results do
//! not depend on the scheduler or on the `parallel` feature.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

pub type PathRng = ChaCha8Rng;

pub fn path_rng(seed: u64, index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn map_paths_sequential<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    F: Fn(u64, &mut PathRng) -> T,
{
    (0..n as u64).map(|i| f(i, &mut path_rng(seed, i))).collect()
}

#[cfg(feature = "parallel")]
pub fn map_paths_parallel<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut PathRng) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n as u64)
        .into_par_iter()
        .map(|i| f(i, &mut path_rng(seed, i)))
        .collect()
}

/// Applies `f` to every path index, in parallel when the `parallel` feature
/// is on. Output order is the path order either way.
pub fn map_paths<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut PathRng) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_paths_parallel(n, seed, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_paths_sequential(n, seed, f)
    }
}

pub fn try_map_paths<T, F>(n: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut PathRng) -> Result<T> + Sync + Send,
{
    map_paths(n, seed, f).into_iter().collect()
}
