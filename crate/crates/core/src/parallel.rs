//! Order-stable fan-out over independent work items.

use rayon::prelude::*;

use crate::{Error, Result};

/// Evaluates `f(0..n)` on `workers` threads and returns results in index order.
/// Each item is computed by a single thread, so results do not depend on `workers`.
pub fn map_indexed<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers == 0 {
        return Err(Error::param("worker_count", "must be at least 1"));
    }
    if workers == 1 || n <= 1 {
        return Ok((0..n).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param("worker_count", e.to_string()))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

/// Like [`map_indexed`] for fallible items; the first error by index wins.
pub fn try_map_indexed<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(workers, n, f)?.into_iter().collect()
}

/// Default worker count: the machine's available parallelism.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
