//! Execution policy for per-node and per-trial loops.
//!
//! With the `parallel` feature (default) the [`ExecPolicy::Parallel`] policy
//! dispatches onto the current rayon pool. Without it, every policy runs the
//! plain sequential loop. Results never depend on the policy: each closure
//! writes only its own slot and reductions happen afterwards in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How data-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecPolicy {
    Sequential,
    #[default]
    Parallel,
}

impl ExecPolicy {
    /// True if this policy actually fans out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecPolicy::Parallel
    }

    /// Apply `f` to every element together with its index.
    pub fn for_each_mut<T, F>(self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
            return;
        }
        items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    }

    /// Apply `f` to every element and collect the results in index order.
    pub fn map_mut<T, R, F>(self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter_mut().enumerate().map(|(i, t)| f(i, t)).collect();
        }
        items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
    }

    /// Map `0..len` to a vector, preserving index order.
    pub fn map_indices<R, F>(self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Run `op` inside a dedicated pool of `threads` workers when a thread cap
    /// is requested; otherwise run it on the caller's pool.
    pub fn install<R: Send>(self, threads: Option<usize>, op: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if let Some(t) = threads {
            if self.is_parallel() {
                match rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
                    Ok(pool) => return pool.install(op),
                    Err(_) => return op(),
                }
            }
        }
        let _ = threads;
        op()
    }
}

/// Thread cap from the `DZO_SIM_THREADS` environment variable, if set and valid.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("DZO_SIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}
