//! Data-parallel plumbing with a sequential fallback.
//!
//! Every parallel site in the crate funnels through [`map_indexed`], which
//! runs on rayon when the `parallel` feature is enabled (the default) and on
//! a plain iterator otherwise. Results come back in index order and callers
//! reduce them sequentially, so outputs are bit-identical across the two
//! backends and across thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
pub fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

/// Caps worker parallelism for the whole process. Call once, before any
/// parallel work; later calls report an error from the pool builder.
#[cfg(feature = "parallel")]
pub fn set_max_threads(n: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| e.to_string())
}

#[cfg(not(feature = "parallel"))]
pub fn set_max_threads(_n: usize) -> Result<(), String> {
    Ok(())
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..len).map(f).collect()
}

/// splitmix64; decorrelates shard seeds derived from a base seed.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-shard generator: the stream depends only on
/// `(seed, shard)`, never on thread scheduling.
pub fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed ^ mix(shard)))
}
