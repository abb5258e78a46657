//! Order-preserving map over work items.
//!
//! With the `parallel` feature enabled the map runs on the rayon thread pool
//! whenever the batch is large enough to amortize fork-join overhead; small
//! batches and `--no-default-features` builds run sequentially. Either way
//! the output order equals the input order, so callers that merge results in
//! sequence behave identically in both builds.

#[cfg(feature = "parallel")]
pub(crate) fn map_collect<I, O, F>(items: &[I], min_parallel: usize, f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    use rayon::prelude::*;
    if items.len() >= min_parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_collect<I, O, F>(items: &[I], _min_parallel: usize, f: F) -> Vec<O>
where
    F: Fn(&I) -> O,
{
    items.iter().map(f).collect()
}
