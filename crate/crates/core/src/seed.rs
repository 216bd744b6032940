//! Counter-based sub-seeds so that every chain, replicate and resample owns
//! an RNG stream that depends only on its position, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream addressed by `path` under `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &p in path {
        s = splitmix64(s ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    s
}

pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
