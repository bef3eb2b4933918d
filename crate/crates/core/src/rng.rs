//! Counter-based random streams.
//!
//! Every random quantity is drawn from ChaCha20 (RFC 8439 block function, 20 rounds)
//! keyed by the user seed: the 256-bit key is the seed as 8 little-endian bytes
//! followed by 24 zero bytes. Independent signals use distinct 64-bit stream ids
//! (the ChaCha nonce), and the block counter starts at 0. Each `f64` takes one
//! 64-bit output word `w` (low 32 bits from the first keystream word, high 32 bits
//! from the next) and maps it to `(w >> 11) * 2^-53` in `[0, 1)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct Stream {
    inner: ChaCha20Rng,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Stream {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut inner = ChaCha20Rng::from_seed(key);
        inner.set_stream(stream);
        Stream { inner }
    }

    /// Uniform draw number `index` of a stream, without generating the ones before it.
    pub fn uniform_at(seed: u64, stream: u64, index: u64) -> f64 {
        let mut s = Stream::new(seed, stream);
        s.inner.set_word_pos(2 * index as u128);
        s.uniform()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n` (n > 0).
    pub fn index(&mut self, n: usize) -> usize {
        (self.uniform() * n as f64) as usize % n
    }

    pub fn sign(&mut self) -> f64 {
        if self.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Stream ids used by the library so that signals drawn for one purpose never
/// overlap those drawn for another under the same seed.
pub mod streams {
    pub const INITIAL: u64 = 1;
    pub const DISTURBANCE: u64 = 2;
    pub const CONTROL_INPUT: u64 = 3;
    pub const AUDIT: u64 = 4;
    pub const RAZUMIKHIN: u64 = 5;
    pub const NOISE: u64 = 6;

    /// Stream for trial `i` of a family, keeping families apart in the high bits.
    pub fn trial(family: u64, i: u64) -> u64 {
        (family << 40) | i
    }

    /// Largest channel and stream numbers a scenario signal may use.
    pub const MAX_CHANNEL: u64 = (1 << 19) - 1;
    pub const MAX_SIGNAL_STREAM: u64 = (1 << 20) - 1;

    /// Stream for a scenario signal: bit 39 set keeps it apart from every `trial` id below 2^39.
    pub fn signal(family: u64, channel: u64, stream: u64) -> u64 {
        (family << 40) | (1 << 39) | ((channel & MAX_CHANNEL) << 20) | (stream & MAX_SIGNAL_STREAM)
    }
}
