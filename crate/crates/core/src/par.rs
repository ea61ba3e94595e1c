//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature, `workers == 0` uses the global rayon pool,
//! `workers == 1` runs inline and larger values run on a dedicated pool of
//! that size. Without the feature everything runs inline. Results are
//! always returned in input order, so callers see identical output
//! regardless of the worker count.

use crate::Result;

/// Environment variable consulted by [`init_global_pool`].
pub const THREADS_ENV: &str = "DUALQSS_THREADS";

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if workers == 1 || items.len() < 2 {
        return Ok(items.iter().map(&f).collect());
    }
    imp::map(items, workers, f)
}

/// Whether this build can run work in parallel.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Sizes the global pool from [`THREADS_ENV`] when set. Returns the thread
/// count requested, if any.
pub fn init_global_pool() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| crate::Error::InvalidConfig(format!("{THREADS_ENV}={raw:?} is not a thread count")))?;
    imp::init_global(n)?;
    Ok(Some(n))
}

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    use crate::{Error, Result};

    pub fn map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        if workers == 0 {
            return Ok(items.par_iter().map(f).collect());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::ThreadPool(e.to_string()))?;
        Ok(pool.install(|| items.par_iter().map(f).collect()))
    }

    pub fn init_global(n: usize) -> Result<()> {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::ThreadPool(e.to_string()))
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    use crate::Result;

    pub fn map<T, R, F>(items: &[T], _workers: usize, f: F) -> Result<Vec<R>>
    where
        F: Fn(&T) -> R,
    {
        Ok(items.iter().map(f).collect())
    }

    pub fn init_global(_n: usize) -> Result<()> {
        Ok(())
    }
}
