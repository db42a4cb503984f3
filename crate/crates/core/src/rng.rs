//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator addressed by
//! a `(master seed, domain, index)` triple:
//!
//! * the 64-bit master seed is expanded into the 256-bit ChaCha key with
//!   `SeedableRng::seed_from_u64`;
//! * the ChaCha stream id is `(domain << 48) | index`, so each domain owns
//!   2^48 independent streams;
//! * within a stream, draws are taken from the block counter starting at 0.
//!
//! Sequence `i` of a simulated batch uses `(seed, Domain::Simulation, i)`,
//! trial `k` of a test run uses `(seed, Domain::Shuffle, k)`. Because every
//! stream is fixed by its address, results do not depend on how work is
//! spread across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tag folded into the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Domain {
    Simulation = 1,
    Shuffle = 2,
    Thinning = 3,
    Subsample = 4,
}

const INDEX_BITS: u32 = 48;

/// Generator for stream `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    assert!(index < (1u64 << INDEX_BITS), "stream index out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << INDEX_BITS) | index);
    rng
}

/// SplitMix64 finalizer; derives child master seeds (e.g. one per dataset)
/// from a parent seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
