//! Deterministic random sub-streams.
//!
//! Every stochastic step draws from a ChaCha stream keyed by the master seed
//! and a small tuple of coordinates (generation, member, purpose). Streams are
//! independent of evaluation order, so sequential and parallel runs agree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SolverRng = ChaCha8Rng;

/// Purpose tags separating streams that share the same coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Decode = 2,
    Alns = 3,
    Mutation = 4,
    Crossover = 5,
    Generator = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the master seed with the coordinates into a 64-bit stream key.
pub fn stream_key(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn stream(seed: u64, purpose: Purpose, coords: &[u64]) -> SolverRng {
    let mut all = Vec::with_capacity(coords.len() + 1);
    all.push(purpose as u64);
    all.extend_from_slice(coords);
    ChaCha8Rng::seed_from_u64(stream_key(seed, &all))
}
