//! Deterministic fixtures: a linearly separable three-class corpus and noisy
//! stand-in predictors. Used by tests, benchmarks and the demo data generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{DatasetSplit, Example, LabelClass};
use crate::error::Result;
use crate::prediction_store::PredictionRecord;

/// Shared filler vocabulary; appears in every class.
const FILLER: &[&str] = &[
    "ভিডিও", "মন্তব্য", "আজ", "খবর", "দেশ", "মানুষ", "সবাই", "এখন", "কথা", "দেখুন", "ভাই", "সময়",
];

const KEYWORDS_PER_CLASS: usize = 10;

/// Keyword vocabulary of one class; vocabularies of different classes are disjoint.
pub fn class_keywords(class: LabelClass) -> Vec<String> {
    let stem = ["shanti", "ghrina", "akromon"][class.index()];
    (0..KEYWORDS_PER_CLASS).map(|j| format!("{stem}{j}")).collect()
}

/// `n` examples with labels cycling 0, 1, 2 in shuffled order. Each text has
/// three keywords of its class and four filler words.
pub fn separable_split(name: &str, n: usize, seed: u64) -> Result<DatasetSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<LabelClass> = (0..n).map(|i| LabelClass::ALL[i % 3]).collect();
    labels.shuffle(&mut rng);
    let vocab: Vec<Vec<String>> = LabelClass::ALL.iter().map(|&c| class_keywords(c)).collect();
    let examples = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let mut words: Vec<String> = (0..3)
                .map(|_| vocab[label.index()][rng.random_range(0..KEYWORDS_PER_CLASS)].clone())
                .collect();
            words.extend((0..4).map(|_| FILLER[rng.random_range(0..FILLER.len())].to_string()));
            words.shuffle(&mut rng);
            Example {
                id: format!("{name}-{i:04}"),
                text: words.join(" "),
                label: Some(label),
            }
        })
        .collect();
    DatasetSplit::new(name, examples)
}

/// Predictions that copy the gold label with probability `accuracy` and are
/// uniformly random otherwise. Logits put 2.0 on the chosen class plus noise in [0, 1).
pub fn noisy_predictions(split: &DatasetSplit, model_id: &str, accuracy: f64, seed: u64) -> Result<Vec<PredictionRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    split
        .examples()
        .iter()
        .map(|e| {
            let label = match e.label {
                Some(gold) if rng.random_bool(accuracy.clamp(0.0, 1.0)) => gold,
                _ => LabelClass::ALL[rng.random_range(0..3)],
            };
            let mut logits = [0.0; 3];
            for v in logits.iter_mut() {
                *v = rng.random_range(0.0..1.0);
            }
            logits[label.index()] += 2.0;
            PredictionRecord::from_logits(e.id.clone(), model_id, logits)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::compute_stats;

    #[test]
    fn balanced_and_deterministic() {
        let a = separable_split("train", 300, 1).unwrap();
        assert_eq!(a, separable_split("train", 300, 1).unwrap());
        let stats = compute_stats(&a);
        assert!(stats.per_class_counts.values().all(|&c| c == 100));
        assert_ne!(a, separable_split("train", 300, 2).unwrap());
    }

    #[test]
    fn keywords_identify_the_class() {
        let split = separable_split("dev", 60, 4).unwrap();
        for e in split.examples() {
            let label = e.label.unwrap();
            for class in LabelClass::ALL {
                let hits = class_keywords(class)
                    .iter()
                    .filter(|k| e.text.split(' ').any(|w| w == k.as_str()))
                    .count();
                assert_eq!(hits > 0, class == label, "{}", e.text);
            }
        }
    }

    #[test]
    fn noisy_predictions_consistent() {
        let split = separable_split("dev", 90, 4).unwrap();
        let perfect = noisy_predictions(&split, "oracle", 1.0, 9).unwrap();
        assert!(perfect.iter().zip(split.examples()).all(|(p, e)| Some(p.label) == e.label));
        let noisy = noisy_predictions(&split, "noisy", 0.5, 9).unwrap();
        assert_eq!(noisy.len(), 90);
        assert_eq!(noisy, noisy_predictions(&split, "noisy", 0.5, 9).unwrap());
    }
}
