//! Deterministic, splittable random streams.
//!
//! A stream is a ChaCha8 generator keyed by a 64-bit seed. Child streams are
//! keyed by mixing the parent key with a tag, so the stream for
//! `(seed, episode, entity)` can be rebuilt anywhere without replaying
//! sibling draws. That keeps results independent of thread scheduling.

use rand::{Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SeededStream {
    key: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        let key = splitmix64(seed);
        let mut bytes = [0u8; 32];
        let mut s = key;
        for chunk in bytes.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        Self { key, rng: ChaCha8Rng::from_seed(bytes) }
    }

    /// Independent child stream. Does not advance `self`.
    pub fn derive(&self, tag: u64) -> Self {
        Self::new(self.key ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
    }

    /// Child stream keyed by a short path of tags.
    pub fn derive_path(&self, tags: &[u64]) -> Self {
        tags.iter().fold(self.clone(), |s, &t| s.derive(t))
    }

    pub fn key(&self) -> u64 {
        self.key
    }
}

impl RngCore for SeededStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.rng.try_fill_bytes(dest)
    }
}
