//! Execution policy for the data-parallel loops (all-pairs distances,
//! projections, batch queries).
//!
//! With the `parallel` feature disabled every policy runs sequentially, so
//! callers never need their own `cfg` switches. Results are identical under
//! either policy: each output slot is computed independently and collected
//! in index order.

/// How a batch loop should be executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this build can actually run loops in parallel.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub(crate) fn map_range<T, F>(n: usize, exec: Exec, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Fills consecutive `chunk`-sized rows of `out` with `f(row_index, row)`.
pub(crate) fn fill_rows<T, F>(out: &mut [T], chunk: usize, exec: Exec, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk == 0 {
        return;
    }
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            out.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
        }
        _ => out
            .chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, row)| f(i, row)),
    }
}
