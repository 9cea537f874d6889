//! Fixtures shared by the kernel benchmarks.

use persona_core::synth::planted_design;
use persona_core::FeatureMatrix;

/// Planted design with signal on the first three columns.
pub fn design(n: usize, m: usize, seed: u64) -> (FeatureMatrix, Vec<bool>) {
    planted_design(n, m, &[0, 1, 2], 1.0, seed).expect("valid design")
}

/// Scores with heavy ties, as produced by coarse classifiers.
pub fn tied_scores(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let (x, y) = design(n, 3, seed);
    let scores = (0..n)
        .map(|i| ((x.values[(i, 0)] + x.values[(i, 1)]) * 20.0).round() / 20.0)
        .collect();
    (scores, y)
}

/// Design whose positives are roughly one in ten rows.
pub fn imbalanced(n: usize, m: usize, seed: u64) -> (FeatureMatrix, Vec<bool>) {
    let (x, mut y) = design(n, m, seed);
    for (i, label) in y.iter_mut().enumerate() {
        *label = *label && i % 5 == 0;
    }
    (x, y)
}
