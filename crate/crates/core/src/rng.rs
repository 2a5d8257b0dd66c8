//! Counter-keyed random streams.
//!
//! A stream is identified by `(seed, axis, index)`; the triple is used directly
//! as the ChaCha key, so every stream can be materialized independently of how
//! many others were drawn before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(seed: u64, axis: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&axis.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
