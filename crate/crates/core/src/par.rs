//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper preserves input order in its output, so results are identical
//! whichever [`Execution`] mode is chosen.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a data-parallel loop is executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Runs on the rayon pool when the `parallel` feature is enabled,
    /// sequentially otherwise.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Maps `f` over `items` with their indices, collecting results in order.
pub fn map_indexed<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    map_range(exec, items.len(), |i| f(i, &items[i]))
}

/// Fallible [`map_indexed`]. On failure the error from the lowest index is
/// returned, independent of scheduling.
pub fn try_map_indexed<T, R, E, F>(exec: Execution, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(usize, &T) -> Result<R, E> + Sync + Send,
{
    map_indexed(exec, items, f).into_iter().collect()
}

/// Caps the global worker pool. `0` leaves rayon's automatic sizing.
/// Without the `parallel` feature this is a no-op.
pub fn configure_threads(threads: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        return rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string());
    }
    let _ = threads;
    Ok(())
}

/// Runs `f` with at most one worker thread available to nested rayon calls.
pub fn single_threaded<R, F>(f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(1).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map_indexed(Execution::Sequential, &items, |i, v| v * 3 + i as u64);
        let par = map_indexed(Execution::Parallel, &items, |i, v| v * 3 + i as u64);
        assert_eq!(seq, par);
        assert_eq!(seq[10], 40);
    }

    #[test]
    fn first_error_wins() {
        let items: Vec<usize> = (0..500).collect();
        let r: Result<Vec<usize>, usize> = try_map_indexed(Execution::Parallel, &items, |i, _| {
            if i % 97 == 13 {
                Err(i)
            } else {
                Ok(i)
            }
        });
        assert_eq!(r, Err(13));
    }

    #[test]
    fn single_threaded_runs_closure() {
        assert_eq!(single_threaded(|| 41 + 1), 42);
    }
}
