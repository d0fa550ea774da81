use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adamw_step, cross_entropy, ModelParams, OptimizerState, NUM_CLASSES};
use crate::corpus::{DatasetSplit, Example};
use crate::error::{Error, Result};
use crate::featurizer::{featurize, FeatureVector, FeaturizerConfig};
use crate::metrics;
use crate::prediction_store::PredictionRecord;

/// Optimization hyperparameters. Defaults follow the transformer fine-tuning
/// recipe (AdamW, lr 1e-5, batch 16, 10 epochs) with the usual AdamW moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 16,
            epochs: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Argument(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return fail(format!("{name} must be in [0, 1), got {beta}"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return fail(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub steps: u64,
}

impl TrainingLog {
    /// One JSON object per epoch, LF-terminated.
    pub fn to_json_lines(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("epoch record serializes") + "\n")
            .collect()
    }
}

/// Trains from zero-initialized parameters and returns the final-epoch parameters.
///
/// Runs `epochs * ceil(N / batch_size)` optimizer steps; the last partial batch
/// is kept. The per-batch gradient is the mean over the batch. When `dev` is
/// labeled its macro F1 is logged after every epoch.
pub fn train(
    split: &DatasetSplit,
    dev: Option<&DatasetSplit>,
    featurizer: &FeaturizerConfig,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainingLog)> {
    featurizer.validate()?;
    config.validate()?;
    if split.is_empty() {
        return Err(Error::Argument(format!("training split `{}` is empty", split.name())));
    }
    let gold = split.gold_labels()?;
    let features: Vec<FeatureVector> = split
        .examples()
        .iter()
        .map(|e| featurize(&e.text, featurizer))
        .collect();
    let dev = match dev {
        Some(d) if !d.is_empty() && d.labeled() => {
            let feats: Vec<FeatureVector> = d.examples().iter().map(|e| featurize(&e.text, featurizer)).collect();
            Some((feats, d.gold_labels()?))
        }
        _ => None,
    };

    let dims = featurizer.dims();
    let mut params = ModelParams::zeros(dims);
    let mut grads = ModelParams::zeros(dims);
    let mut state = OptimizerState::new(dims);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..split.len()).collect();
    let mut log = TrainingLog::default();

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let x = &features[i];
                let (loss, grad_logits) = cross_entropy(&params.logits(x), gold[i])?;
                loss_sum += loss;
                for (k, gk) in grad_logits.iter().enumerate().take(NUM_CLASSES) {
                    let row = &mut grads.weights[k * dims..(k + 1) * dims];
                    for &(j, v) in x.entries() {
                        row[j as usize] += gk * v * scale;
                    }
                    grads.bias[k] += gk * scale;
                }
            }
            adamw_step(&mut params, &grads, &mut state, config)?;
            // reset only what the batch touched
            for &i in batch {
                for k in 0..NUM_CLASSES {
                    for &(j, _) in features[i].entries() {
                        grads.weights[k * dims + j as usize] = 0.0;
                    }
                }
            }
            grads.bias = [0.0; NUM_CLASSES];
        }
        if !params.is_finite() {
            return Err(Error::Numeric(format!("parameters diverged in epoch {epoch}")));
        }
        let dev_macro_f1 = match &dev {
            Some((feats, gold)) => {
                let pred: Vec<_> = feats
                    .iter()
                    .map(|x| crate::prediction_store::argmax_label(&params.logits(x)))
                    .collect();
                Some(metrics::macro_f1(&pred, gold)?)
            }
            None => None,
        };
        log.epochs.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / split.len() as f64,
            dev_macro_f1,
        });
    }
    log.steps = state.t;
    Ok((params, log))
}

/// Scores one example; the label is the logits argmax with lowest-index tie-break.
pub fn predict(
    params: &ModelParams,
    example: &Example,
    featurizer: &FeaturizerConfig,
    model_id: &str,
) -> Result<PredictionRecord> {
    if params.dims() != featurizer.dims() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} feature dims", featurizer.dims()),
            actual: format!("{} parameter dims", params.dims()),
        });
    }
    let x = featurize(&example.text, featurizer);
    PredictionRecord::from_logits(example.id.clone(), model_id, params.logits(&x))
}

pub fn predict_split(
    params: &ModelParams,
    split: &DatasetSplit,
    featurizer: &FeaturizerConfig,
    model_id: &str,
) -> Result<Vec<PredictionRecord>> {
    split
        .examples()
        .iter()
        .map(|e| predict(params, e, featurizer, model_id))
        .collect()
}
