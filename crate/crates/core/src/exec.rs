//! Seed splitting and the worker pool used by every Monte Carlo loop.
//!
//! Randomness is derived from a 64-bit master seed and a key path
//! `(phase, index, chunk)`. Work is cut into fixed-size chunks that each own
//! a stream, so results depend only on the seed and never on how many
//! workers execute the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Number of trials sharing one derived stream.
pub const CHUNK: u64 = 256;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic stream factory keyed by a master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child factory whose streams are disjoint from the parent's other keys.
    pub fn child(&self, key: &[u64]) -> Streams {
        Streams {
            seed: self.mix(key),
        }
    }

    pub fn stream(&self, key: &[u64]) -> Stream {
        let base = self.mix(key);
        let mut bytes = [0u8; 32];
        for (k, chunk) in bytes.chunks_exact_mut(8).enumerate() {
            chunk.copy_from_slice(&splitmix(base ^ (k as u64).wrapping_mul(0xa076_1d64_78bd_642f)).to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }

    fn mix(&self, key: &[u64]) -> u64 {
        key.iter().fold(splitmix(self.seed), |h, &k| splitmix(h ^ splitmix(k)))
    }
}

/// Worker configuration for chunked Monte Carlo loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exec {
    workers: usize,
}

impl Default for Exec {
    fn default() -> Self {
        Self::sequential()
    }
}

impl Exec {
    pub fn sequential() -> Self {
        Self { workers: 1 }
    }

    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `f` on every chunk of `0..count` and returns the per-chunk
    /// results in chunk order. `f` receives the chunk index and the range
    /// of item indices it covers.
    pub fn map_chunks<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, std::ops::Range<u64>) -> T + Sync,
    {
        let chunks = count.div_ceil(CHUNK);
        let run = |c: u64| {
            let lo = c * CHUNK;
            f(c, lo..(lo + CHUNK).min(count))
        };
        if self.workers == 1 || chunks <= 1 {
            return (0..chunks).map(run).collect();
        }
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
        {
            Ok(pool) => pool.install(|| (0..chunks).into_par_iter().map(run).collect()),
            Err(_) => (0..chunks).map(run).collect(),
        }
    }

    /// Counts indices in `0..count` for which `trial` returns true, giving
    /// each chunk the stream `streams.stream(&[key.., chunk])`.
    pub fn count_true<F>(&self, streams: &Streams, key: &[u64], count: u64, trial: F) -> u64
    where
        F: Fn(u64, &mut Stream) -> bool + Sync,
    {
        self.map_chunks(count, |c, range| {
            let mut path = key.to_vec();
            path.push(c);
            let mut rng = streams.stream(&path);
            range.filter(|&k| trial(k, &mut rng)).count() as u64
        })
        .into_iter()
        .sum()
    }
}
