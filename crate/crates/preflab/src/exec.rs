//! Parallel map with a sequential fallback.
//!
//! All data-parallel stages (rollout batches, CEM populations, sweep rows)
//! funnel through [`par_map`]. With the `parallel` feature it fans out over
//! rayon; without it the same call runs sequentially. Outputs are collected
//! in input order and every reduction in the crate happens sequentially
//! afterwards, so numeric results do not depend on the feature or on thread
//! count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, preserving index order in the output.
#[cfg(feature = "parallel")]
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving index order in the output.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    seq_map(n, f)
}

/// Sequential reference path for the same shape of computation; the
/// benchmark suite compares it against [`par_map`].
pub fn seq_map<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_and_seq_agree() {
        let f = |i: usize| (i as f64).sqrt() * 3.0;
        assert_eq!(par_map(100, f), seq_map(100, f));
    }
}
