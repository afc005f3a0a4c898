//! Seeded random streams.
//!
//! Every stochastic operation draws from a [`Stream`]. Streams are ChaCha20
//! generators; child streams are derived from a parent seed and a label so
//! that parallel work stays reproducible regardless of scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Stream {
    seed: u64,
    inner: ChaCha20Rng,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream { seed, inner: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream keyed by `label` and `index`; does not advance `self`.
    pub fn derive(&self, label: &str, index: u64) -> Stream {
        let s = splitmix(splitmix(self.seed ^ fnv(label)).wrapping_add(index));
        Stream::new(s)
    }

    /// Child stream seeded from the current position; advances `self`.
    pub fn fork(&mut self) -> Stream {
        Stream::new(self.inner.next_u64())
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn bit(&mut self) -> bool {
        self.inner.random::<bool>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn state(&self) -> StreamState {
        StreamState {
            seed: self.seed,
            word_pos: self.inner.get_word_pos().to_string(),
        }
    }

    pub fn restore(state: &StreamState) -> Result<Self> {
        let pos: u128 = state
            .word_pos
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad stream position {}", state.word_pos)))?;
        let mut s = Stream::new(state.seed);
        s.inner.set_word_pos(pos);
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamState {
    pub seed: u64,
    pub word_pos: String,
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

/// Worker count from `DEEP_RANDOM_WORKERS`, defaulting to the rayon pool size.
pub fn worker_count() -> usize {
    std::env::var("DEEP_RANDOM_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Runs `f` on each index in parallel chunks and returns results in index order.
pub fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let workers = worker_count();
    if workers <= 1 || count < 2 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restore_continues_bit_exactly() {
        let mut a = Stream::new(7);
        for _ in 0..13 {
            a.next_u32();
        }
        let st = a.state();
        let mut b = Stream::restore(&st).unwrap();
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derive_is_pure() {
        let a = Stream::new(3);
        let mut c1 = a.derive("x", 4);
        let mut c2 = a.derive("x", 4);
        let mut c3 = a.derive("x", 5);
        let v1 = c1.next_u64();
        assert_eq!(v1, c2.next_u64());
        assert_ne!(v1, c3.next_u64());
    }
}
