//! Deterministic counter-based RNG substreams.
//!
//! Every random quantity in a simulation is drawn from a stream keyed by
//! `(master seed, frame index, role)`. Results are therefore identical for
//! any number of workers and any execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream roles. Keeping these stable keeps archived results reproducible.
pub mod role {
    pub const INFO_BITS: u64 = 1;
    /// Co-polarization channel taps (HH and VV).
    pub const CHANNEL_CO: u64 = 2;
    /// Cross-polarization channel taps (HV and VH).
    pub const CHANNEL_CROSS: u64 = 3;
    pub const NOISE_H: u64 = 4;
    pub const NOISE_V: u64 = 5;
    /// Pilot value sequence (frame-independent).
    pub const PILOT_SEQ: u64 = 6;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Substream generator for `(master, frame, role)`.
pub fn substream(master: u64, frame: u64, role: u64) -> ChaCha12Rng {
    let mut state = master
        ^ frame.wrapping_mul(0xa076_1d64_78bd_642f)
        ^ role.wrapping_mul(0xe703_7ed1_a0b4_28db);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}
