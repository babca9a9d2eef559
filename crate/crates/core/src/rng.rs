//! Counter-based random streams.
//!
//! Every Monte-Carlo path or chain draws from its own ChaCha stream, keyed by
//! the master seed and the path index. Results are therefore independent of
//! thread count and scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// Generator for path `index` of a run seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derive an independent master seed for a named sub-task of a run.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
