//! Deterministic pairwise (tree) summation.
//!
//! The tree shape depends only on the input length, so the result of a sum is
//! reproducible bit for bit regardless of how callers partition work across
//! threads. Rounding error grows as `O(log n)` rather than `O(n)`.

use std::ops::Add;

use num_traits::Zero;

const LEAF: usize = 8;

/// Sums `xs` with a fixed binary tree over blocks of eight.
pub fn pairwise_sum<T>(xs: &[T]) -> T
where
    T: Copy + Zero + Add<Output = T>,
{
    if xs.len() <= LEAF {
        let mut acc = T::zero();
        for &x in xs {
            acc = acc + x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(x)` over `xs`, using `buf` as scratch space.
pub fn pairwise_sum_map<S, T, F>(xs: &[S], buf: &mut Vec<T>, f: F) -> T
where
    T: Copy + Zero + Add<Output = T>,
    F: FnMut(&S) -> T,
{
    buf.clear();
    buf.extend(xs.iter().map(f));
    pairwise_sum(buf)
}
