//! Data-parallel map with a sequential fallback.
//!
//! Everything batch-shaped in this crate (sweep rows, Monte-Carlo geometry
//! checks, per-trajectory diagnostics) funnels through [`par_map`]. With the
//! `parallel` feature (default) it fans out over rayon; without it the same
//! call runs sequentially. Results come back in input order either way, so
//! outputs are identical across thread counts.

/// Map `f` over `items`, preserving input order in the result.
#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Sequential map with the same signature as [`par_map`]; kept unconditionally
/// so benchmarks can compare both paths in one build.
pub fn seq_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}
