//! Node-parallel evaluation of spectral integrands on the rayon pool.

use halfline_core::spectral::Executor;
use rayon::prelude::*;

use crate::Error;

/// Environment variable read when `--threads` is not given.
pub const THREADS_ENV: &str = "HALFLINE_SPECTRAL_THREADS";

/// Evaluates spectral nodes on the current rayon pool; results keep node
/// order, so sums are identical for any number of workers.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExecutor;

impl Executor for RayonExecutor {
    fn map(
        &self,
        nodes: &[f64],
        f: &(dyn Fn(f64) -> Result<Vec<f64>, halfline_core::Error> + Sync),
    ) -> Result<Vec<Vec<f64>>, halfline_core::Error> {
        nodes.par_iter().map(|&l| f(l)).collect()
    }
}

/// Pool with `threads` workers, or rayon's default when `None`.
pub fn thread_pool(threads: Option<usize>) -> crate::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}
