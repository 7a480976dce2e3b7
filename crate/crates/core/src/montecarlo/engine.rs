//! Deterministic replica-parallel execution.
//!
//! Replicas are cut into blocks of [`BLOCK_SIZE`] regardless of the worker
//! count. Each block is folded sequentially, block results come back in
//! block order, and they are merged by a pairwise tree whose shape depends
//! only on the number of blocks. The result is therefore bit-identical for
//! any number of workers.

use rayon::prelude::*;

use super::stats::{MeanVar, MeanVarVec};
use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};

pub const BLOCK_SIZE: u64 = 64;

/// Accumulators that can absorb a later accumulator.
pub trait Merge {
    fn merge(&mut self, later: Self);
}

impl Merge for MeanVar {
    fn merge(&mut self, later: Self) {
        MeanVar::merge(self, &later);
    }
}

impl Merge for MeanVarVec {
    fn merge(&mut self, later: Self) {
        MeanVarVec::merge(self, &later);
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge(&mut self, later: Self) {
        self.0.merge(later.0);
        self.1.merge(later.1);
    }
}

impl<T> Merge for Vec<T> {
    fn merge(&mut self, later: Self) {
        self.extend(later);
    }
}

/// Merges neighbours level by level: ((a b)(c d))(e).
pub fn tree_merge<A: Merge>(mut items: Vec<A>) -> Option<A> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.merge(b);
            }
            next.push(a);
        }
        items = next;
    }
    items.pop()
}

pub struct Engine {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("workers", &self.workers).finish()
    }
}

impl Engine {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::invalid("worker count must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?;
        Ok(Self { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn blocks(replicas: u64) -> Vec<(u64, u64)> {
        (0..replicas.div_ceil(BLOCK_SIZE))
            .map(|b| (b * BLOCK_SIZE, ((b + 1) * BLOCK_SIZE).min(replicas)))
            .collect()
    }

    /// Folds every replica into an accumulator. Replica `r` draws from the
    /// stream `(seed, r)`.
    pub fn fold<A, I, F>(&self, seed: u64, replicas: u64, init: I, f: F) -> Result<A>
    where
        A: Merge + Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut StreamRng, u64, &mut A) -> Result<()> + Sync,
    {
        if replicas == 0 {
            return Err(Error::invalid("replica count must be at least 1"));
        }
        let blocks = Self::blocks(replicas);
        let parts: Vec<Result<A>> = self.pool.install(|| {
            blocks
                .par_iter()
                .map(|&(lo, hi)| {
                    let mut acc = init();
                    for r in lo..hi {
                        let mut rng = RngStream::new(seed, r).rng();
                        f(&mut rng, r, &mut acc)?;
                    }
                    Ok(acc)
                })
                .collect()
        });
        let parts = parts.into_iter().collect::<Result<Vec<A>>>()?;
        Ok(tree_merge(parts).expect("at least one block"))
    }

    /// Per-replica outputs in replica order.
    pub fn collect<T, F>(&self, seed: u64, replicas: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&mut StreamRng, u64) -> Result<T> + Sync,
    {
        self.fold(seed, replicas, Vec::new, |rng, r, acc: &mut Vec<T>| {
            acc.push(f(rng, r)?);
            Ok(())
        })
    }

    /// Per-replica scalars folded into a [`MeanVar`].
    pub fn mean_var<F>(&self, seed: u64, replicas: u64, f: F) -> Result<MeanVar>
    where
        F: Fn(&mut StreamRng, u64) -> Result<f64> + Sync,
    {
        self.fold(seed, replicas, MeanVar::default, |rng, r, acc| {
            acc.push(f(rng, r)?);
            Ok(())
        })
    }

    /// Per-replica vectors of fixed width folded component-wise.
    pub fn mean_var_vec<F>(&self, seed: u64, replicas: u64, width: usize, f: F) -> Result<MeanVarVec>
    where
        F: Fn(&mut StreamRng, u64, &mut Vec<f64>) -> Result<()> + Sync,
    {
        self.fold(
            seed,
            replicas,
            || MeanVarVec::new(width),
            |rng, r, acc| {
                let mut buf = Vec::with_capacity(width);
                f(rng, r, &mut buf)?;
                if buf.len() != width {
                    return Err(Error::DimensionMismatch {
                        expected: width,
                        actual: buf.len(),
                    });
                }
                acc.push(&buf);
                Ok(())
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn tree_shape_is_fixed() {
        let got = tree_merge((0..5).map(|k| vec![k]).collect()).unwrap();
        assert_eq!(got, vec![0, 1, 2, 3, 4]);
        assert!(tree_merge(Vec::<Vec<u8>>::new()).is_none());
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        let run = |workers| {
            Engine::new(workers)
                .unwrap()
                .mean_var(11, 1000, |rng, _| Ok(rng.random::<f64>().ln()))
                .unwrap()
        };
        let one = run(1);
        for w in [2, 3, 8] {
            let other = run(w);
            assert_eq!(one.mean.to_bits(), other.mean.to_bits());
            assert_eq!(one.m2.to_bits(), other.m2.to_bits());
        }
        assert_eq!(one.count, 1000);
    }

    #[test]
    fn collect_keeps_replica_order() {
        let e = Engine::new(4).unwrap();
        let got = e.collect(1, 300, |_, r| Ok(r)).unwrap();
        assert_eq!(got, (0..300).collect::<Vec<_>>());
    }

    #[test]
    fn replica_streams_are_distinct_and_stable() {
        let e = Engine::new(2).unwrap();
        let a = e.collect(5, 3, |rng, _| Ok(rng.random::<u64>())).unwrap();
        let b = e.collect(5, 3, |rng, _| Ok(rng.random::<u64>())).unwrap();
        assert_eq!(a, b);
        assert!(a[0] != a[1] && a[1] != a[2]);
        assert_eq!(a[1], RngStream::new(5, 1).rng().random::<u64>());
    }

    #[test]
    fn errors_propagate() {
        let e = Engine::new(2).unwrap();
        let r = e.mean_var(0, 200, |_, r| {
            if r == 150 {
                Err(Error::invalid("boom"))
            } else {
                Ok(0.0)
            }
        });
        assert!(r.is_err());
        assert!(e.mean_var(0, 0, |_, _| Ok(0.0)).is_err());
        assert!(Engine::new(0).is_err());
        let width = e.mean_var_vec(0, 4, 2, |_, _, buf| {
            buf.push(1.0);
            Ok(())
        });
        assert!(matches!(width, Err(Error::DimensionMismatch { .. })));
    }
}
