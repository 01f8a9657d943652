use std::ops::Range;

use num_complex::Complex64;

use super::ComplexMatrix;
use crate::exec;

/// Leaves of at most this many elements are summed left to right.
const LEAF: usize = 16;
/// Below this length subtrees are not handed to another thread.
const SPAWN_MIN: usize = 2048;

/// Balanced binary reduction over `0..len`.
///
/// The tree shape depends only on `len`: a range is split at its midpoint
/// until it holds at most `LEAF` indices, then `leaf` is called on it. With the
/// `parallel` feature the two halves may run on different threads, but the
/// combination order never changes, so the result is bitwise reproducible.
pub fn tree_reduce<T, L, C>(len: usize, leaf: &L, combine: &C) -> Option<T>
where
    T: Send,
    L: Fn(Range<usize>) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    if len == 0 {
        return None;
    }
    Some(reduce_range(0..len, leaf, combine))
}

fn reduce_range<T, L, C>(range: Range<usize>, leaf: &L, combine: &C) -> T
where
    T: Send,
    L: Fn(Range<usize>) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    let len = range.end - range.start;
    if len <= LEAF {
        return leaf(range);
    }
    let mid = range.start + len / 2;
    let (lo, hi) = if len >= SPAWN_MIN {
        exec::join(|| reduce_range(range.start..mid, leaf, combine), || reduce_range(mid..range.end, leaf, combine))
    } else {
        (reduce_range(range.start..mid, leaf, combine), reduce_range(mid..range.end, leaf, combine))
    };
    combine(lo, hi)
}

/// Pairwise sum of complex values.
pub fn tree_sum(values: &[Complex64]) -> Complex64 {
    tree_reduce(
        values.len(),
        &|r: Range<usize>| values[r].iter().fold(Complex64::new(0.0, 0.0), |acc, v| acc + v),
        &|a, b| a + b,
    )
    .unwrap_or_default()
}

/// Pairwise sum of real values.
pub fn tree_sum_real(values: &[f64]) -> f64 {
    tree_reduce(values.len(), &|r: Range<usize>| values[r].iter().sum::<f64>(), &|a, b| a + b).unwrap_or(0.0)
}

/// `A* diag(w) A`, i.e. `Σ_i w_i conj(A_ij) A_ik`, reduced over rows of `A`
/// with the deterministic tree.
pub fn weighted_gram(a: &ComplexMatrix, weights: &[Complex64]) -> ComplexMatrix {
    assert_eq!(a.rows(), weights.len(), "one weight per row");
    let n = a.cols();
    let leaf = |r: Range<usize>| {
        let mut acc = ComplexMatrix::zeros(n, n);
        for i in r {
            let row = a.row(i);
            let w = weights[i];
            for (j, aj) in row.iter().enumerate() {
                let s = w * aj.conj();
                for (o, ak) in acc.row_mut(j).iter_mut().zip(row) {
                    *o += s * ak;
                }
            }
        }
        acc
    };
    tree_reduce(a.rows(), &leaf, &|x, y| &x + &y).expect("at least one row")
}
