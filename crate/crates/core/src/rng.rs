//! Counter-based random streams.
//!
//! Every stochastic quantity is addressed by `(seed, stream, index)`. ChaCha is
//! a counter-mode cipher, so seeking to a word position gives the same value
//! as iterating up to it, and results never depend on generation order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Sequential reader over one keyed stream.
#[derive(Clone, Debug)]
pub struct KeyedStream {
    rng: ChaCha8Rng,
}

impl KeyedStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Stream positioned at `index`, where every index owns `draws` u64 words.
    pub fn at(seed: u64, stream: u64, index: u64, draws: u64) -> Self {
        let mut s = Self::new(seed, stream);
        // ChaCha word positions count 32-bit words.
        s.rng.set_word_pos(u128::from(index) * u128::from(draws) * 2);
        s
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; consumes exactly two u64 words.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_unit();
        let u2 = self.next_unit();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }
}

/// Derives an independent seed for the sub-computation named by `key`.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    KeyedStream::new(seed, key).next_u64()
}
