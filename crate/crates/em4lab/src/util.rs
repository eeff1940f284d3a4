//! Small numeric helpers shared across modules.

/// Pairwise (cascade) summation. Deterministic for a fixed input order and
/// considerably more accurate than naive left-to-right accumulation on long
/// quadrature and grid reductions.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const BASE: usize = 16;
    if v.len() <= BASE {
        let mut s = 0.0;
        for &x in v {
            s += x;
        }
        return s;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Mean via pairwise summation; 0 for an empty slice.
pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        pairwise_sum(v) / v.len() as f64
    }
}

/// Maximum of a slice, NaN-propagating; -inf for an empty slice.
pub fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Minimum of a slice; +inf for an empty slice.
pub fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Max absolute deviation from the mean, the constancy measure used by the
/// scan reports.
pub fn max_dev_from_mean(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().copied().fold(0.0, |acc, x| acc.max((x - m).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_on_small_input() {
        let v = [1.0, 2.0, 3.0, 4.5];
        assert_eq!(pairwise_sum(&v), 10.5);
    }

    #[test]
    fn pairwise_beats_naive_on_ill_conditioned_sum() {
        // alternating large/small values whose exact sum is n
        let n = 100_000;
        let mut v = Vec::with_capacity(2 * n);
        for _ in 0..n {
            v.push(1.0 + 1e-14);
            v.push(-1e-14);
        }
        let s = pairwise_sum(&v);
        assert!((s - n as f64).abs() < 1e-6);
    }

    #[test]
    fn stats_helpers() {
        let v = [1.0, 3.0, 2.0];
        assert_eq!(mean(&v), 2.0);
        assert_eq!(max(&v), 3.0);
        assert_eq!(min(&v), 1.0);
        assert_eq!(max_dev_from_mean(&v), 1.0);
    }
}
