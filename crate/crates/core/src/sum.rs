//! Deterministic reductions.
//!
//! Energies and residuals are assembled as per-triangle contribution
//! vectors (a parallel map in deterministic index order) and then reduced
//! with a fixed-shape pairwise summation tree. The result is independent
//! of the rayon thread count, which is what makes byte-identical reruns
//! possible, and pairwise summation keeps the rounding error at
//! O(log n · eps) instead of O(n · eps).

use num_complex::Complex64;

const PAIRWISE_LEAF: usize = 32;

/// Pairwise sum of a slice of f64, fixed reduction tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of complex contributions, fixed reduction tree.
pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    if values.len() <= PAIRWISE_LEAF {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum_complex(&values[..mid]) + pairwise_sum_complex(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sum_on_small_input() {
        let v = [1.0, 2.5, -0.5, 4.0];
        assert_eq!(pairwise_sum(&v), 7.0);
    }

    #[test]
    fn large_sum_close_to_exact() {
        let v: Vec<f64> = (0..100_000).map(|i| (i as f64).sin()).collect();
        let exact: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - exact).abs() < 1e-9);
    }

    #[test]
    fn complex_sum_matches_componentwise() {
        let v: Vec<Complex64> = (0..1000)
            .map(|i| Complex64::new(i as f64, -(i as f64) * 0.5))
            .collect();
        let s = pairwise_sum_complex(&v);
        let re: Vec<f64> = v.iter().map(|c| c.re).collect();
        let im: Vec<f64> = v.iter().map(|c| c.im).collect();
        assert_eq!(s.re, pairwise_sum(&re));
        assert_eq!(s.im, pairwise_sum(&im));
    }
}
