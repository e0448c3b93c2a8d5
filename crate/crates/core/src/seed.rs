//! Deterministic seed splitting.
//!
//! Every random stream in the workspace is derived from a master seed, a
//! stream name and an index:
//!
//! ```text
//! h   = fnv1a64(stream)
//! s   = splitmix64(master ^ splitmix64(h ^ splitmix64(index)))
//! ```
//!
//! Changing how one component consumes randomness therefore never perturbs
//! another component's stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

pub fn derive_seed(master: u64, stream: &str, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(fnv1a64(stream) ^ splitmix64(index)))
}

pub fn stream_rng(master: u64, stream: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}
