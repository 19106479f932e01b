//! Thread-pool runner.

use rayon::prelude::*;
use rcldpc_core::Runner;

/// Runs jobs on a dedicated rayon pool. Results come back in index order,
/// so output never depends on the worker count.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `workers == 0` means one per available core.
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let n = if workers == 0 { available_workers() } else { workers };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
        Ok(Parallel { pool })
    }
}

impl Runner for Parallel {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }

    fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
