//! Data-parallel execution helper.
//!
//! Independent work items (clients within a round, rows of a public-set
//! evaluation, finite-difference coordinates, estimator sample points) run
//! through [`map_indexed`]. With the `parallel` feature the items execute on
//! the rayon pool; without it, or after [`set_parallel_enabled`]`(false)`,
//! they run sequentially. Outputs are collected in index order, so results
//! are bit-identical across modes and thread counts.

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL_ENABLED: AtomicBool = AtomicBool::new(true);

/// Runtime toggle for the parallel path; a no-op without the `parallel`
/// feature. Used by the benchmark suite to compare both modes in one build.
pub fn set_parallel_enabled(enabled: bool) {
    PARALLEL_ENABLED.store(enabled, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL_ENABLED.load(Ordering::Relaxed)
}

/// Apply `f` to `0..n`, returning outputs in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let out = map_indexed(100, |i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn sequential_toggle_matches_parallel() {
        let par = map_indexed(64, |i| (i as f64).sin());
        set_parallel_enabled(false);
        let seq = map_indexed(64, |i| (i as f64).sin());
        set_parallel_enabled(true);
        assert_eq!(par, seq);
    }
}
