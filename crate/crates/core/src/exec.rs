//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (on by default) work is spread over the rayon
//! global pool. Without it, or with [`Exec::Sequential`], the same closures run
//! in order on the calling thread. Results are always returned in input order,
//! so output never depends on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Parallel when the feature is enabled, otherwise sequential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Exec {
    /// Map `f` over `items`, keeping order.
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
        }
    }

    /// Map `f(index, item)` over `items`, keeping order.
    pub fn map_indexed<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        }
    }

    /// Apply `f` to every element in place.
    pub fn for_each_mut<T, F>(self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter_mut().enumerate().for_each(|(i, t)| f(i, t)),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t)),
        }
    }
}

/// Run `f` inside a dedicated pool of `workers` threads when `workers` is set.
///
/// Falls back to the global pool (or plain sequential execution without the
/// `parallel` feature).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = workers.filter(|&n| n > 0) {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(f);
        }
        log::warn!("could not build a {n}-thread pool, using the global pool");
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    f()
}
