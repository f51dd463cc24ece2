//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 seeded with the caller's
//! 64-bit seed. Independent purposes use distinct ChaCha stream ids, so adding
//! draws to one purpose never shifts the values seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids used by the chain simulator.
pub mod purpose {
    pub const ARRIVALS: u64 = 1;
    pub const TIMING: u64 = 2;
    pub const SENDERS: u64 = 3;
    pub const PRICES: u64 = 4;
    pub const GAS: u64 = 5;
    pub const HASHES: u64 = 6;
    pub const BLOCK_SAMPLE: u64 = 7;
}

pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream for one bootstrap replicate of one validation window.
pub fn replicate_stream(seed: u64, window_index: usize, rep_index: usize) -> ChaCha8Rng {
    stream(seed, ((window_index as u64) << 32) | rep_index as u64)
}
