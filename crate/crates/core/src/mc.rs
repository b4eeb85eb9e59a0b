//! Sharded Monte Carlo: one random stream per shard, ordered reduction.

use rayon::prelude::*;

use crate::numerics::rng::{stream_id, RngStream};

/// Stream families keep different experiments on disjoint streams.
pub mod family {
    pub const BESSEL: u32 = 1;
    pub const FLOW: u32 = 2;
    pub const SLE: u32 = 3;
    pub const DYSON: u32 = 4;
    pub const HERMITIAN_BM: u32 = 5;
    pub const HCIZ: u32 = 6;
    pub const BRIDGE: u32 = 7;
    pub const GUE: u32 = 8;
    pub const LERW: u32 = 9;
    pub const LAMPERTI: u32 = 10;
    pub const MISC: u32 = 11;
}

/// How a Monte Carlo run is split. Results depend on `seed` and `shards`
/// only; `workers` changes wall time, not output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sharding {
    pub seed: u64,
    pub shards: u32,
    pub workers: usize,
}

impl Sharding {
    pub const DEFAULT_SHARDS: u32 = 16;

    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            shards: Self::DEFAULT_SHARDS,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_shards(mut self, shards: u32) -> Self {
        self.shards = shards.max(1);
        self
    }

    /// Number of samples handled by `shard` when splitting `total`.
    pub fn shard_len(&self, total: usize, shard: u32) -> usize {
        let k = self.shards as usize;
        total / k + usize::from((shard as usize) < total % k)
    }

    /// Runs `task(rng, shard_samples)` on every shard and returns the
    /// results in shard order.
    pub fn run<T, F>(&self, family: u32, total: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut RngStream, usize) -> T + Sync,
    {
        let body = |shard: u32| {
            let mut rng = RngStream::new(self.seed, stream_id(family, shard));
            task(&mut rng, self.shard_len(total, shard))
        };
        if self.workers <= 1 {
            return (0..self.shards).map(body).collect();
        }
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
        {
            Ok(pool) => pool.install(|| (0..self.shards).into_par_iter().map(body).collect()),
            Err(_) => (0..self.shards).map(body).collect(),
        }
    }

    /// Convenience wrapper collecting one value per sample.
    pub fn samples<T, F>(&self, family: u32, total: usize, draw: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut RngStream) -> T + Sync,
    {
        self.run(family, total, |rng, n| {
            (0..n).map(|_| draw(rng)).collect::<Vec<T>>()
        })
        .into_iter()
        .flatten()
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shard_lengths_cover_total() {
        let s = Sharding::new(1).with_shards(7);
        let total: usize = (0..7).map(|k| s.shard_len(1000, k)).sum();
        assert_eq!(total, 1000);
    }

    #[test]
    fn output_independent_of_worker_count() {
        let one = Sharding::new(9).samples(family::MISC, 1000, |r| r.normal());
        let four = Sharding::new(9)
            .with_workers(4)
            .samples(family::MISC, 1000, |r| r.normal());
        assert_eq!(one.len(), 1000);
        assert!(one
            .iter()
            .zip(&four)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        let other = Sharding::new(10).samples(family::MISC, 1000, |r| r.normal());
        assert_ne!(one[0].to_bits(), other[0].to_bits());
    }
}
