//! Reductions with a summation order that does not depend on the thread count.

use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Sum of `f(i)` for `i in 0..len`. Work is split in fixed chunks, each chunk
/// summed sequentially, then the partial sums are added left to right.
pub fn sum(len: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    let partials: Vec<f64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    partials.into_iter().sum()
}

/// Maximum of `f(i)`; returns 0 for an empty range.
pub fn max(len: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    (0..len)
        .into_par_iter()
        .map(f)
        .reduce(|| 0.0, f64::max)
}
