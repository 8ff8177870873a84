use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

/// A reproducible random substream: a master seed plus a stream id.
///
/// Identical `(seed, stream)` pairs always produce identical sequences.
/// Parallel work derives one substream per work unit with [`RngStream::substream`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn substream(&self, id: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(id.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }

    /// Substream addressed by a short path of ids, e.g. `(k, chunk)`.
    pub fn path(&self, ids: &[u64]) -> Self {
        ids.iter().fold(*self, |s, &id| s.substream(id))
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic split of a sample budget into chunks. Results depend on the
/// chunk count, never on how many threads execute the chunks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub chunks: usize,
}

impl Default for ChunkPlan {
    fn default() -> Self {
        Self { chunks: 8 }
    }
}

impl ChunkPlan {
    pub fn new(chunks: usize) -> Self {
        Self {
            chunks: chunks.max(1),
        }
    }

    /// Sample counts per chunk, summing to `total`.
    pub fn split(&self, total: usize) -> Vec<usize> {
        let c = self.chunks.max(1);
        let base = total / c;
        let extra = total % c;
        (0..c).map(|i| base + usize::from(i < extra)).collect()
    }

    /// Runs `work(chunk_index, count, rng)` on every chunk in parallel and
    /// returns the results in chunk order.
    pub fn run<T, F>(&self, stream: &RngStream, total: usize, work: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, usize, &mut StreamRng) -> T + Sync,
    {
        use rayon::prelude::*;
        let counts = self.split(total);
        counts
            .into_par_iter()
            .enumerate()
            .map(|(i, count)| {
                let mut rng = stream.substream(i as u64).rng();
                work(i, count, &mut rng)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_streams_reproduce() {
        let s = RngStream::new(7).substream(3);
        let a: Vec<u64> = (0..8).map({
            let mut r = s.rng();
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut r = s.rng();
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
        let mut other = RngStream::new(7).substream(4).rng();
        assert_ne!(a[0], other.random::<u64>());
    }

    #[test]
    fn split_sums_to_total() {
        let plan = ChunkPlan::new(7);
        let parts = plan.split(100);
        assert_eq!(parts.len(), 7);
        assert_eq!(parts.iter().sum::<usize>(), 100);
    }

    #[test]
    fn run_is_independent_of_thread_count() {
        let plan = ChunkPlan::new(5);
        let stream = RngStream::new(11);
        let work = |_i: usize, n: usize, rng: &mut StreamRng| -> f64 {
            (0..n).map(|_| rng.random::<f64>()).sum()
        };
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| plan.run(&stream, 1000, work));
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| plan.run(&stream, 1000, work));
        assert_eq!(one, four);
    }
}
