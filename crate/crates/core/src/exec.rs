//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Exec::Parallel`] fans index ranges
//! out over the current rayon pool; without it every call runs in order.
//! Results are always returned in index order so outputs do not depend on
//! the schedule.

use std::env;

/// Environment variable capping the worker count.
pub const WORKERS_ENV: &str = "MNAC_GT_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// `f(i)` for `i in 0..n`, collected in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            Exec::Parallel => (0..n).map(f).collect(),
        }
    }

    /// Map then fold with an associative, commutative `merge`.
    ///
    /// Work is split into `chunks` contiguous index blocks that are folded
    /// sequentially and then merged in block order.
    pub fn map_reduce<T, F, M>(self, n: usize, chunks: usize, identity: T, f: F, merge: M) -> T
    where
        T: Send + Clone + Sync,
        F: Fn(usize) -> T + Sync + Send,
        M: Fn(T, T) -> T + Sync + Send,
    {
        let chunks = chunks.clamp(1, n.max(1));
        let per = n.div_ceil(chunks);
        let partial = self.map(chunks, |c| {
            let lo = c * per;
            let hi = ((c + 1) * per).min(n);
            (lo..hi).fold(identity.clone(), |acc, i| merge(acc, f(i)))
        });
        partial.into_iter().reduce(merge).unwrap_or(identity)
    }
}

/// Worker count requested through [`WORKERS_ENV`], if set and valid.
pub fn workers_from_env() -> Option<usize> {
    env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Run `f` with at most `workers` threads.
///
/// `None` uses the global pool. Without the `parallel` feature the worker
/// count is ignored.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => return pool.install(f),
            Err(e) => log::warn!("could not build a {n}-thread pool ({e}); using the global pool"),
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let seq = Exec::Sequential.map(1000, |i| i * i);
        let par = with_workers(Some(4), || Exec::Parallel.map(1000, |i| i * i));
        assert_eq!(seq, par);
    }

    #[test]
    fn map_reduce_matches_sum() {
        let want: u64 = (0..10_001u64).sum();
        for chunks in [1, 3, 64, 50_000] {
            let got = Exec::Parallel.map_reduce(10_001, chunks, 0u64, |i| i as u64, |a, b| a + b);
            assert_eq!(got, want);
        }
        assert_eq!(Exec::Sequential.map_reduce(0, 8, 0u64, |i| i as u64, |a, b| a + b), 0);
    }
}
