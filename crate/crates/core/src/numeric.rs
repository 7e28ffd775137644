//! Deterministic floating-point reductions.

const LEAF: usize = 16;

/// Pairwise (tree) summation of a slice.
///
/// The reduction tree depends only on the slice length, so the result is
/// bitwise reproducible for a given input and the rounding error grows as
/// O(log n) rather than O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_by(values.len(), |i| values[i])
}

/// Pairwise summation of `term(0) + term(1) + ... + term(len - 1)`.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(len: usize, term: F) -> f64 {
    sum_range(0, len, &term)
}

fn sum_range<F: Fn(usize) -> f64>(start: usize, end: usize, term: &F) -> f64 {
    let len = end - start;
    if len <= LEAF {
        let mut acc = 0.0;
        for i in start..end {
            acc += term(i);
        }
        return acc;
    }
    let mid = start + len / 2;
    sum_range(start, mid, term) + sum_range(mid, end, term)
}
