//! Data-parallel map facade.
//!
//! Grid scans and quadrature loops funnel through [`map_indexed`], which runs
//! on rayon when the `parallel` feature (default) is enabled and falls back
//! to a plain sequential loop otherwise. Results are always assembled in
//! index order and reductions happen outside this module, so outputs are
//! bit-identical across thread counts and across the two backends.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Always-sequential variant, kept alongside the parallel path so the bench
/// suite can compare the two on identical workloads.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Collapse per-index fallible results into the first error in index order,
/// independent of execution order.
pub fn collect_results<T>(v: Vec<crate::Result<T>>) -> crate::Result<Vec<T>> {
    let mut out = Vec::with_capacity(v.len());
    for r in v {
        out.push(r?);
    }
    Ok(out)
}

/// Cap the global worker pool. `None` or `Some(0)` leaves the automatic
/// thread count. Honors the `EM4LAB_THREADS` contract of the CLI; calling it
/// more than once is a no-op after the first pool is built.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: Option<usize>) {
    if let Some(n) = n {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: Option<usize>) {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let a = map_indexed(1000, |i| (i as f64).sin());
        let b = map_indexed_seq(1000, |i| (i as f64).sin());
        assert_eq!(a, b);
    }
}
