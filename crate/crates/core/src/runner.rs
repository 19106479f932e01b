//! Execution strategy for independent, index-addressed jobs.

use alloc::vec::Vec;

/// Maps a job over `0..n` and returns results in index order.
///
/// Implementations may run jobs in any order or in parallel; callers rely
/// only on the returned vector being ordered by index.
pub trait Runner: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;

    /// Number of jobs the runner executes concurrently.
    fn workers(&self) -> usize {
        1
    }
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Runner for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
