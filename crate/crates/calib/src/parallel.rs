//! Concurrent batch evaluation.

use rayon::prelude::*;

use abmcal_core::framework::{Evaluator, LabeledSample};

use crate::error::{Error, Result};

/// Evaluates a batch on a dedicated thread pool; results keep index order,
/// so runs are identical for any number of jobs.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `jobs = None` uses one thread per core.
    pub fn new(jobs: Option<usize>) -> Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = jobs {
            if n == 0 {
                return Err(Error::Invalid("--jobs must be at least 1".into()));
            }
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        self.pool.install(f)
    }
}

impl Evaluator for Parallel {
    fn map(
        &self,
        n: usize,
        job: &(dyn Fn(usize) -> abmcal_core::Result<LabeledSample> + Sync),
    ) -> abmcal_core::Result<Vec<LabeledSample>> {
        self.pool.install(|| (0..n).into_par_iter().map(job).collect())
    }
}
