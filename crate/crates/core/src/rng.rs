//! Counter-based random streams.
//!
//! Every random draw comes from a ChaCha8 generator keyed by
//! `(master seed, counter, stream label)`, where the counter is the round
//! or restart index. No generator is shared between rounds, so results do
//! not depend on how work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    /// Which setting a round plays, when inputs are random.
    Inputs = 1,
    /// Randomness shared by both parties (hidden variables).
    Shared = 2,
    /// The internal coin of a PR box.
    PrBox = 3,
    /// Alice's private randomness.
    AlicePrivate = 4,
    /// Bob's private randomness.
    BobPrivate = 5,
    /// Restart points of numerical searches.
    Search = 6,
    /// Random test settings (direction pairs).
    Settings = 7,
}

pub fn stream(seed: u64, counter: u64, label: Stream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&counter.to_le_bytes());
    key[16..24].copy_from_slice(&(label as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Uniform point on the unit sphere (normalized Gaussian triple).
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// SplitMix64 finalizer, used for compact digests.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
