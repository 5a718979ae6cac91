//! Keyed random streams.
//!
//! Every stochastic routine draws from a [`Stream`] addressed by a
//! [`StreamKey`]: an experiment seed, a domain label and up to four integer
//! coordinates (person, item, replication, ...). The key selects a ChaCha8
//! key and stream id directly, so the numbers a given coordinate sees do not
//! depend on how many other streams were created or in which order. This is
//! what makes the parallel experiment bit-reproducible under any thread
//! count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Address of a stream. Coordinates 2 and 3 are packed into the 64-bit
/// ChaCha stream id, so they must be below 2^32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub domain: u64,
    pub coords: [u64; 4],
}

impl StreamKey {
    pub fn new(seed: u64, domain: &str, coords: [u64; 4]) -> Self {
        debug_assert!(coords[2] < 1 << 32 && coords[3] < 1 << 32);
        StreamKey {
            seed,
            domain: domain_label(domain),
            coords,
        }
    }

    pub fn stream(self) -> Stream {
        Stream::from_key(self)
    }
}

/// A deterministic random number stream; implements [`RngCore`].
#[derive(Debug, Clone)]
pub struct Stream {
    key: StreamKey,
    inner: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, domain: &str, coords: [u64; 4]) -> Self {
        Self::from_key(StreamKey::new(seed, domain, coords))
    }

    pub fn from_key(key: StreamKey) -> Self {
        let mut bytes = [0u8; 32];
        for (chunk, word) in bytes
            .chunks_exact_mut(8)
            .zip([key.seed, key.domain, key.coords[0], key.coords[1]])
        {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(bytes);
        inner.set_stream((key.coords[2] << 32) | (key.coords[3] & 0xffff_ffff));
        Stream { key, inner }
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        open01(self)
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Uniform draw on (0, 1) with 53 bits of resolution; never returns 0 or 1.
pub fn open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw on [0, 1).
pub fn unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Bernoulli draw; exact for `p = 0` and `p = 1`.
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> bool {
    unit(rng) < p
}

// FNV-1a
fn domain_label(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
