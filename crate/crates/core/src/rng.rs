//! Counter-based uniform streams.
//!
//! Every draw is addressed by `(seed, stream, index)`, so any worker can
//! regenerate point `i` without touching the others. This is what keeps
//! sampled artifacts identical across thread counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream ids used by the library.
pub mod streams {
    pub const NOISE: u64 = 1;
    pub const REAL: u64 = 2;
    pub const GENERATOR_SAMPLE: u64 = 3;
    pub const PERTURB: u64 = 4;
    pub const NET_CHECK: u64 = 5;
}

#[derive(Clone)]
pub struct UniformStream {
    base: ChaCha8Rng,
    dim: usize,
}

impl UniformStream {
    pub fn new(seed: u64, stream: u64, dim: usize) -> Self {
        let mut base = ChaCha8Rng::seed_from_u64(seed);
        base.set_stream(stream);
        Self { base, dim }
    }

    /// Fill `out` (length `dim`) with the uniform point at `index`.
    pub fn point(&self, index: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let mut rng = self.base.clone();
        // one f64 consumes two 32-bit words
        rng.set_word_pos(index as u128 * 2 * self.dim as u128);
        for v in out.iter_mut() {
            *v = rng.gen::<f64>();
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// SplitMix64 finalizer, used to derive sub-seeds (e.g. per trial).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
