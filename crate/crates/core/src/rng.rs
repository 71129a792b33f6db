//! Counter-keyed normal variates.
//!
//! Each `(seed, stream)` pair selects an independent ChaCha8 keystream and
//! step `i` of a path always consumes words `[i·w, (i+1)·w)` of it, so a
//! path is a pure function of its key regardless of how paths are scheduled
//! across workers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit words consumed by one normal draw (two `u64` uniforms).
const WORDS_PER_NORMAL: u128 = 4;

#[derive(Clone, Debug)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Positions the stream at normal draw number `index`.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(index as u128 * WORDS_PER_NORMAL);
    }

    /// Standard normal by Box–Muller (cosine branch only).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Random access: the `index`-th normal of stream `(seed, stream)`.
    pub fn normal_at(seed: u64, stream: u64, index: u64) -> f64 {
        let mut s = Self::new(seed, stream);
        s.seek(index);
        s.next_normal()
    }
}
