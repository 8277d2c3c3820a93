//! Counter-based splittable random streams.
//!
//! Every stochastic draw in the generator comes from a substream keyed by
//! `(master seed, shell index, mode index, draw kind)`. Substreams are
//! independent of each other and of iteration order, so mode construction
//! can be parallelized freely while staying bit-reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Part of the stream key so that adding a
/// draw to one stage never shifts the draws of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum DrawKind {
    Position = 1,
    Wavevector = 2,
    Rotation = 3,
    Coefficients = 4,
    AdvectionVelocity = 5,
    Frequency = 6,
    Phase = 7,
    ClEstimate = 8,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes the key tuple into a single 64-bit stream seed.
#[inline]
pub fn stream_seed(seed: u64, shell: u64, mode: u64, kind: DrawKind) -> u64 {
    let mut state = seed;
    let a = splitmix64(&mut state);
    let mut h = a ^ shell.wrapping_mul(0xd6e8_feb8_6659_fd93);
    h = splitmix64(&mut h) ^ mode.wrapping_mul(0xa076_1d64_78bd_642f);
    h = splitmix64(&mut h) ^ (kind as u64).wrapping_mul(0xe703_7ed1_a0b4_28db);
    splitmix64(&mut h)
}

/// Substream for one `(shell, mode, kind)` cell.
pub fn substream(seed: u64, shell: u64, mode: u64, kind: DrawKind) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, shell, mode, kind))
}
