//! Seeded, splittable random streams.
//!
//! Every stochastic operation in the crate draws from an [`RngStream`]. A
//! stream is identified by `(seed, stream_id)` and backed by ChaCha8, whose
//! 64-bit stream selector gives independent sub-sequences for the same seed.
//! Two streams with equal identity produce the same draws on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derives a child stream from this stream's identity (not its position).
    ///
    /// Children with different labels never share draws with each other or
    /// with the parent, and deriving a child does not advance the parent.
    pub fn substream(&self, label: u64) -> RngStream {
        RngStream::new(self.seed, mix(self.stream_id, label))
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform draw on `[lo, hi]`; returns `lo` when the interval is empty.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.uniform();
        if hi <= lo {
            lo
        } else {
            lo + (hi - lo) * u
        }
    }

    /// One Bernoulli trial; always consumes exactly one uniform draw.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngStream {
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

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(stream_id: u64, label: u64) -> u64 {
    splitmix64(stream_id ^ splitmix64(label.wrapping_add(0x632b_e59b_d9b4_e019)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_identity_same_draws() {
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 0);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 1);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn substream_ignores_parent_position() {
        let mut parent = RngStream::new(3, 11);
        let before = parent.substream(5);
        parent.uniform();
        let after = parent.substream(5);
        assert_eq!(before.stream_id(), after.stream_id());
        assert_ne!(parent.substream(6).stream_id(), after.stream_id());
    }

    #[test]
    fn degenerate_bernoulli() {
        let mut rng = RngStream::new(1, 1);
        for _ in 0..1000 {
            assert!(rng.bernoulli(1.0));
            assert!(!rng.bernoulli(0.0));
        }
    }
}
