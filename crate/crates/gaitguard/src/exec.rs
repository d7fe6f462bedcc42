//! Thread-pool executor for the sweep.

use rayon::prelude::*;

use gaitguard_core::privacy::Executor;

/// Maps on the current rayon pool. Output order matches input order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl Executor for Parallel {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.par_iter().map(f).collect()
    }
}
