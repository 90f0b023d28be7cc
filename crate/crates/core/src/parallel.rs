//! Index-ordered map over a work range: on the rayon pool when the
//! `parallel` feature is enabled and requested, sequentially otherwise.
//!
//! Results always come back in index order, and callers reduce them
//! sequentially, so sums do not depend on the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_indexed<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; returns the first error by index.
pub fn try_map_indexed<T, E, F>(n: usize, parallel: bool, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(n, parallel, f).into_iter().collect()
}

/// Whether outer loops can actually run concurrently in this build.
pub const fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}
