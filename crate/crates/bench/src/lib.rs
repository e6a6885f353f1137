//! Deterministic fixtures shared by the benchmarks.

use ndarray::Array2;
use vecuq_core::ScoreMatrix;

/// `n x m` nonnegative scores from a low-discrepancy sequence, with columns on
/// different scales so scaling matters.
pub fn score_fixture(n: usize, m: usize) -> ScoreMatrix {
    // additive recurrence on fractional parts of square roots
    let alphas: Vec<f64> = (1..=m).map(|k| (1.0 + k as f64).sqrt().fract()).collect();
    let values = Array2::from_shape_fn((n, m), |(i, k)| {
        let u = (0.5 + alphas[k] * (i + 1) as f64).fract();
        -(1.0 - u).ln() * (k + 1) as f64
    });
    ScoreMatrix::unnamed(values).expect("fixture scores are finite and nonnegative")
}
