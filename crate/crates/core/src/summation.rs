//! Fixed-order pairwise summation.
//!
//! Every reduction in the crate goes through [`pairwise_sum`], so the
//! rounding of a total depends only on the number of terms and never on how
//! the terms were produced (serially or by a thread pool).

const BLOCK: usize = 8;

/// Sums `term(i)` for `i` in `0..len` along a balanced binary tree.
pub fn pairwise_sum<F: Fn(usize) -> f64>(len: usize, term: F) -> f64 {
    sum_range(0, len, &term)
}

/// Pairwise sum of a slice.
pub fn pairwise_slice(values: &[f64]) -> f64 {
    pairwise_sum(values.len(), |i| values[i])
}

fn sum_range<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
    if hi - lo <= BLOCK {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += term(i);
        }
        acc
    } else {
        let mid = lo + (hi - lo) / 2;
        sum_range(lo, mid, term) + sum_range(mid, hi, term)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_small() {
        assert_eq!(pairwise_sum(0, |_| 1.0), 0.0);
        assert_eq!(pairwise_sum(5, |i| i as f64), 10.0);
    }

    #[test]
    fn beats_naive_on_long_runs() {
        let n = 1 << 20;
        let exact = n as f64 * 0.1;
        let naive: f64 = (0..n).map(|_| 0.1).sum();
        let tree = pairwise_sum(n, |_| 0.1);
        assert!((tree - exact).abs() <= (naive - exact).abs());
        assert!((tree - exact).abs() < 1e-9);
    }
}
