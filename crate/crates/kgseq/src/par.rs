//! Data-parallel helpers with a sequential fallback.
//!
//! With the default `parallel` feature the helpers fan work out over rayon;
//! without it they degrade to plain iterators. Both paths collect results in
//! input order and reduce sequentially, so numeric output is bit-identical
//! whichever path runs and however many worker threads are active.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Runs `f` inside a rayon pool of `workers` threads (0 = library default).
///
/// Without the `parallel` feature the worker count is ignored and `f` runs on
/// the calling thread.
#[cfg(feature = "parallel")]
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to build worker pool")
        .install(f)
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R: Send>(_workers: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

/// Ordered map over a slice.
#[cfg(feature = "parallel")]
pub fn map_slice<I: Sync, R: Send>(items: &[I], f: impl Fn(&I) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<I: Sync, R: Send>(items: &[I], f: impl Fn(&I) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Ordered map over fixed-size chunks of a slice.
///
/// The chunk size is independent of the worker count, which keeps chunked
/// reductions deterministic.
#[cfg(feature = "parallel")]
pub fn map_chunks<I: Sync, R: Send>(
    items: &[I],
    chunk: usize,
    f: impl Fn(&[I]) -> R + Sync + Send,
) -> Vec<R> {
    items.par_chunks(chunk).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_chunks<I: Sync, R: Send>(
    items: &[I],
    chunk: usize,
    f: impl Fn(&[I]) -> R + Sync + Send,
) -> Vec<R> {
    items.chunks(chunk).map(f).collect()
}

/// Ordered map over an index range.
#[cfg(feature = "parallel")]
pub fn map_range<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    (0..n).map(f).collect()
}
