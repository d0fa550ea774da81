//! Seeded inputs for the criterion benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vitd_core::{LabelClass, PredictionMatrix};

/// Gold labels cycling through the classes.
pub fn gold(n: usize) -> Vec<LabelClass> {
    (0..n).map(|i| LabelClass::ALL[i % 3]).collect()
}

/// `m` models over `gold`, model `k` right with probability `0.5 + 0.08 k`.
pub fn prediction_matrix(m: usize, gold: &[LabelClass], seed: u64) -> PredictionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..m)
        .map(|k| {
            let acc = (0.5 + 0.08 * k as f64).min(0.95);
            gold.iter()
                .map(|&g| if rng.random_bool(acc) { g } else { LabelClass::ALL[rng.random_range(0..3)] })
                .collect()
        })
        .collect();
    PredictionMatrix::from_rows(
        (0..m).map(|k| format!("model-{k}")).collect(),
        (0..gold.len()).map(|i| format!("ex-{i}")).collect(),
        rows,
    )
    .expect("consistent shape")
}

/// Random labels, uniform over the classes.
pub fn random_labels(n: usize, seed: u64) -> Vec<LabelClass> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| LabelClass::ALL[rng.random_range(0..3)]).collect()
}
