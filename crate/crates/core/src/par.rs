//! Index-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the work runs on the rayon pool when asked
//! to; otherwise, or when `parallel` is false, it runs in index order. Both
//! paths return identical results: maps preserve order and searches return
//! the lowest matching index.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
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

/// First index (lowest) for which `f` returns `Some`.
pub fn find_first<T, F>(n: usize, parallel: bool, f: F) -> Option<(usize, T)>
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..n).into_par_iter().find_map_first(|i| f(i).map(|v| (i, v)));
    }
    let _ = parallel;
    (0..n).find_map(|i| f(i).map(|v| (i, v)))
}
