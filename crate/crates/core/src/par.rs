//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper produces results that do not depend on the number of worker
//! threads: maps preserve index order, and sums follow a fixed binary tree
//! whose split points depend only on the input length.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Leaf size of the summation tree.
const LEAF: usize = 256;

/// Subtrees larger than this are summed on separate workers.
#[cfg(feature = "parallel")]
const PAR_SPLIT: usize = 4096;

pub(crate) fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
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

pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

pub(crate) fn for_each_owned<T, F>(items: Vec<T>, f: F)
where
    T: Send,
    F: Fn(usize, T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().enumerate().for_each(|(i, t)| f(i, t));
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().enumerate().for_each(|(i, t)| f(i, t));
    }
}

/// Sum of `f(i)` for `i in 0..n` using a fixed pairwise tree.
pub(crate) fn tree_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    tree_sum_range(0, n, &f)
}

fn tree_sum_range<F>(lo: usize, hi: usize, f: &F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let len = hi - lo;
    if len <= LEAF {
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        return s;
    }
    let mid = lo + len / 2;
    #[cfg(feature = "parallel")]
    {
        if len > PAR_SPLIT {
            let (a, b) = rayon::join(|| tree_sum_range(lo, mid, f), || tree_sum_range(mid, hi, f));
            return a + b;
        }
    }
    tree_sum_range(lo, mid, f) + tree_sum_range(mid, hi, f)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    tree_sum(a.len(), |i| a[i] * b[i])
}
