//! Replication fan-out. `BALKWISE_THREADS` caps the number of workers.

use std::sync::OnceLock;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{CliError, Result};

pub const THREADS_ENV: &str = "BALKWISE_THREADS";

pub fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn pool() -> Result<&'static ThreadPool> {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    if let Some(p) = POOL.get() {
        return Ok(p);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        builder = builder.num_threads(n);
    }
    let built = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(POOL.get_or_init(|| built))
}

/// `f(0), ..., f(n-1)` on the worker pool, returned in index order.
pub fn replicate<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    Ok(pool()?.install(|| (0..n).into_par_iter().map(f).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_index_order() {
        let v = replicate(1000, |i| i * 2).unwrap();
        assert!(v.iter().enumerate().all(|(i, x)| *x == 2 * i));
    }
}
