//! Counter-style random streams.
//!
//! Every stream is a ChaCha generator whose 256-bit key is the tuple
//! `(seed, domain, a, b)`, so a draw depends only on its coordinates and
//! never on how many other draws happened before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share a key.
pub(crate) mod domain {
    pub const CLASS_MATRIX: u64 = 1;
    pub const STYLE_MATRIX: u64 = 2;
    pub const SAMPLE_LABEL: u64 = 3;
    pub const SAMPLE_STYLE: u64 = 4;
    pub const SAMPLE_NOISE: u64 = 5;
    pub const EPOCH_SHUFFLE: u64 = 6;
    pub const PARAM_INIT: u64 = 7;
    pub const PROBE_INIT: u64 = 8;
    pub const PROBE_SHUFFLE: u64 = 9;
}

pub fn keyed(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, domain, a, b]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
