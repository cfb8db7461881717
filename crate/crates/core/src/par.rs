//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) large element-wise maps and
//! raster rows are spread over the rayon pool. Without it, or with
//! [`Parallelism::Sequential`], the same closures run in order. Both paths
//! produce identical output; only scheduling differs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Minimum number of items before work is handed to the thread pool.
pub const PAR_THRESHOLD: usize = 16 * 1024;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// True when this build can actually run work in parallel.
    pub fn is_effective(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Builds `(0..n).map(f)` into a vector.
pub fn map_range<T, F>(mode: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_effective() && n >= PAR_THRESHOLD {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Runs `f(chunk_index, chunk)` over `data.chunks_mut(chunk_len)`.
pub fn for_each_chunk_mut<T, F>(mode: Parallelism, data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    if mode.is_effective() {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = mode;
    for (i, c) in data.chunks_mut(chunk_len).enumerate() {
        f(i, c);
    }
}

/// Applies `f` to every item, returning results in input order.
pub fn map_slice<I, T, F>(mode: Parallelism, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_effective() && items.len() > 1 {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}
