//! Data-parallel map over replicate indices.
//!
//! Results come back in index order regardless of execution order, so
//! callers see identical output for any parallelism degree. With the
//! `parallel` feature disabled (or parallelism <= 1) the map runs on the
//! calling thread.

use crate::error::{Error, Result};

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(parallelism: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallelism <= 1 {
        return (0..n).map(f).collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(_parallelism: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Default worker count: the `ZRESID_THREADS` environment variable when set,
/// otherwise the available hardware parallelism.
pub fn default_parallelism() -> usize {
    if let Ok(v) = std::env::var("ZRESID_THREADS") {
        if let Ok(k) = v.trim().parse::<usize>() {
            return k.max(1);
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
