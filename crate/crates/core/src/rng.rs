//! Counter-based random substreams.
//!
//! Every random draw in the pipeline comes from a stream keyed by
//! `(seed, domain, index)`, so results do not depend on generation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, domain, index)`.
pub fn substream(seed: u64, domain: u64, index: u64) -> Stream {
    let mut state = seed ^ domain.rotate_left(32);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Child seed for a named stage.
pub fn derive(seed: u64, name: &str) -> u64 {
    let mut state = seed ^ domain(name);
    splitmix64(&mut state)
}

/// Stable 64-bit tag for a domain name.
pub const fn domain(name: &str) -> u64 {
    // FNV-1a
    let bytes = name.as_bytes();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut i = 0;
    while i < bytes.len() {
        hash ^= bytes[i] as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
        i += 1;
    }
    hash
}
