//! Deterministic parallel reductions.
//!
//! Work is cut into fixed-size blocks independent of the thread count; blocks are
//! reduced in parallel and the partial results are combined in block order.

use std::ops::Range;

use rayon::prelude::*;

pub const BLOCK: usize = 2048;

/// Applies `f` to consecutive index blocks of `0..n` and returns the results in order.
pub fn block_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let blocks = n.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| f(b * BLOCK..((b + 1) * BLOCK).min(n)))
        .collect()
}

/// Sum of `f(i)` over `0..n` with a summation order that does not depend on the pool size.
pub fn sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    block_map(n, |r| r.map(&f).sum::<f64>()).into_iter().sum()
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum_by(n, |i| values[i]) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = sum_by(n, |i| (values[i] - mean).powi(2));
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
