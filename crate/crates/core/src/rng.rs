//! Seeded random streams.
//!
//! Every stochastic operation draws from a ChaCha8 stream keyed by
//! `(seed, purpose, index)`. The 32-byte ChaCha key is the little-endian
//! concatenation of the three words followed by a fixed tag word, so two
//! different purposes (or indices) can never share a stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    TrainData = 1,
    PoolData = 2,
    Init = 3,
    BatchIndices = 4,
    Perturb = 5,
    Subsample = 6,
    EvalSet = 7,
    Rademacher = 8,
    TaskModel = 9,
    Instance = 10,
}

const TAG: u64 = u64::from_le_bytes(*b"trajtopo");

/// Independent stream for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..32].copy_from_slice(&TAG.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
