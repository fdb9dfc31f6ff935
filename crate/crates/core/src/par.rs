//! Execution policy for the data-parallel loops.
//!
//! Dense products and independent training runs can fan out over a rayon
//! pool when the `parallel` feature is enabled. Without the feature every
//! policy collapses to the sequential path, so callers never need to
//! branch on the feature themselves.

use serde::{Deserialize, Serialize};

/// How data-parallel work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// The policy actually in effect after accounting for compiled features.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }

    pub fn is_parallel(self) -> bool {
        self.effective() == Execution::Parallel
    }
}

/// Maps `f` over `items`, preserving input order in the output.
pub fn map_ordered<T, R, F>(items: Vec<T>, exec: Execution, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.into_par_iter().map(f).collect();
    }
    let _ = exec;
    items.into_iter().map(f).collect()
}
