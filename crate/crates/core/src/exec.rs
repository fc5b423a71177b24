//! Data-parallel map with a sequential fallback.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How independent analyses are scheduled. Without the `parallel` feature
/// `Parallel` runs sequentially too.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Maps `f` over `items`, keeping input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }
}
