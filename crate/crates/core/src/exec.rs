//! Execution strategy for data-parallel loops.
//!
//! Results are always returned in input order, so any reduction performed
//! over them by the caller is identical under both strategies.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Exec {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
            #[cfg(not(feature = "parallel"))]
            Exec::Parallel => items.iter().map(f).collect(),
        }
    }

    /// Maps over fixed-size chunks. Chunk boundaries do not depend on the
    /// strategy or thread count.
    pub fn map_chunks<T, R, F>(self, items: &[T], chunk: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&[T]) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        match self {
            Exec::Sequential => items.chunks(chunk).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_chunks(chunk).map(f).collect(),
            #[cfg(not(feature = "parallel"))]
            Exec::Parallel => items.chunks(chunk).map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let sq = |x: &u64| x * x;
        assert_eq!(Exec::Sequential.map(&xs, sq), Exec::Parallel.map(&xs, sq));
        let sum = |c: &[u64]| c.iter().sum::<u64>();
        assert_eq!(
            Exec::Sequential.map_chunks(&xs, 7, sum),
            Exec::Parallel.map_chunks(&xs, 7, sum)
        );
    }
}
