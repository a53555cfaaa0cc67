//! Data-parallel building blocks with a sequential fallback.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run the
//! same loops on the calling thread. Reductions are split into fixed-size blocks
//! whose partial sums are combined in index order, so the floating-point result
//! does not depend on the thread count or on the feature being enabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Block length for deterministic reductions.
pub const BLOCK: usize = 2048;

/// Whether the crate was built with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Evaluates `f` on `0..n` and collects the results in index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Calls `f(chunk_index, chunk)` on consecutive chunks of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(c, s)| f(c, s));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(c, s)| f(c, s));
    }
}

/// Sums `f(range)` over fixed blocks of `0..n`.
pub fn block_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync + Send,
{
    if n <= BLOCK {
        return f(0..n);
    }
    let n_blocks = n.div_ceil(BLOCK);
    let partial = map_collect(n_blocks, |b| f(b * BLOCK..((b + 1) * BLOCK).min(n)));
    partial.into_iter().sum()
}

/// Dot product with deterministic blocking.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    block_sum(x.len(), |r| x[r.clone()].iter().zip(&y[r]).map(|(a, b)| a * b).sum())
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
