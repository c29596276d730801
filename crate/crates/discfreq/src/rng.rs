//! Seed derivation for every randomized component.
//!
//! All randomness in the crate is derived from one `u64` seed by mixing in
//! a stream tag and per-item indices with splitmix64. The partition search
//! for anchor `a` must behave identically whether it runs inside the global
//! greedy or inside the local simulation, so its generator is a pure
//! function of `(seed, anchor, attempt)` and never part of a shared stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::VertexId;

/// Stream tags keep independent uses of the same seed decorrelated.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Stream {
    Rank = 1,
    Search = 2,
    Sample = 3,
    Pilot = 4,
    Profile = 5,
}

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Chain-mixes `seed` with each word in `parts`.
pub fn mix(seed: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ 0x8f1b_bcdc_cafe_f00d);
    for &p in parts {
        h = splitmix64(h ^ p.wrapping_mul(0x2545_f491_4f6c_dd1d));
    }
    h
}

/// Rank key of a vertex: a pseudorandom priority with the vertex id as a
/// tie-break, so keys are always distinct. Sorting vertices by rank key
/// realizes the random permutation of the global greedy without
/// materializing it.
pub type RankKey = (u64, u32);

#[inline]
pub fn rank_key(seed: u64, v: VertexId) -> RankKey {
    (mix(seed, &[Stream::Rank as u64, v.index() as u64]), v.raw())
}

/// Generator driving attempt number `attempt` of the isolated-neighbourhood
/// search anchored at `anchor`.
pub fn search_rng(seed: u64, anchor: VertexId, attempt: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(
        seed,
        &[Stream::Search as u64, anchor.index() as u64, attempt as u64],
    ))
}

/// Generator for one indexed draw of a derived stream (samples, pilot, ...).
pub fn indexed_rng(seed: u64, stream: Stream, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, &[stream as u64, index as u64]))
}
