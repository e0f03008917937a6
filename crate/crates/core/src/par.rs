//! Deterministic data-parallel maps.
//!
//! Work is split into fixed-size chunks whose results are collected in
//! index order, so reductions over the returned vector are bit-identical no
//! matter how many threads ran them.

/// How a batch of independent work items is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

pub const CHUNK: usize = 1024;

/// Applies `f` to each chunk `[start, end)` of `0..n` and returns the chunk
/// results in order.
pub fn map_chunks<T, F>(n: usize, chunk: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let bounds = move |i: usize| (i * chunk, ((i + 1) * chunk).min(n));
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n_chunks)
                .into_par_iter()
                .map(|i| {
                    let (s, e) = bounds(i);
                    f(s, e)
                })
                .collect()
        }
        _ => (0..n_chunks)
            .map(|i| {
                let (s, e) = bounds(i);
                f(s, e)
            })
            .collect(),
    }
}

/// Applies `f` to every index of `0..n`, preserving order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}
