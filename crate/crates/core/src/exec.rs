//! Dispatch between rayon and sequential execution.
//!
//! Every parallel loop in this crate is a pure map over an index range whose
//! results are collected in index order, so the parallel and sequential paths
//! produce identical output, including float accumulation order.

/// Maps `f` over `0..n`, in parallel when `parallel` is true and the
/// `parallel` feature is enabled. Output order is always `0..n`.
pub(crate) fn map_indices<R, F>(n: usize, parallel: bool, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// True when the `parallel` feature is compiled in.
pub(crate) fn default_parallel() -> bool {
    cfg!(feature = "parallel")
}
