//! Multinomial logistic regression over hashed features, trained with
//! mini-batch AdamW on cross-entropy. This is the in-repo reference model;
//! its defaults (lr 1e-5, batch 16, 10 epochs) mirror the fine-tuning recipe
//! used for the external transformer predictors.

mod artifact;
mod optim;
mod train;

pub use artifact::{load_model, read_model, save_model, write_model, TrainedModel, ARTIFACT_FORMAT};
pub use optim::{adamw_step, OptimizerState};
pub use train::{predict, predict_split, train, EpochRecord, TrainConfig, TrainingLog};

use crate::corpus::LabelClass;
use crate::error::{Error, Result};
use crate::featurizer::FeatureVector;

pub const NUM_CLASSES: usize = LabelClass::COUNT;

/// Weight matrix (classes × dims, row-major) and bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: usize,
    weights: Vec<f64>,
    bias: [f64; NUM_CLASSES],
}

impl ModelParams {
    pub fn zeros(dims: usize) -> Self {
        Self {
            dims,
            weights: vec![0.0; NUM_CLASSES * dims],
            bias: [0.0; NUM_CLASSES],
        }
    }

    pub fn from_parts(dims: usize, weights: Vec<f64>, bias: [f64; NUM_CLASSES]) -> Result<Self> {
        if weights.len() != NUM_CLASSES * dims {
            return Err(Error::ShapeMismatch {
                expected: format!("{NUM_CLASSES} x {dims} weights"),
                actual: format!("{} weights", weights.len()),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("parameters must be finite".into()));
        }
        Ok(Self { dims, weights, bias })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64; NUM_CLASSES] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64; NUM_CLASSES] {
        &mut self.bias
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dims..(class + 1) * self.dims]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    /// `W·x + b`.
    pub fn logits(&self, x: &FeatureVector) -> [f64; NUM_CLASSES] {
        let mut out = self.bias;
        for (k, o) in out.iter_mut().enumerate() {
            *o += x.dot(self.row(k));
        }
        out
    }

    fn shape_matches(&self, other: &ModelParams) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch {
                expected: format!("{NUM_CLASSES} x {}", self.dims),
                actual: format!("{NUM_CLASSES} x {}", other.dims),
            });
        }
        Ok(())
    }
}

fn check_finite(logits: &[f64]) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::Argument("softmax of an empty vector".into()));
    }
    if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite logit {bad}")));
    }
    Ok(())
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite(logits)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Loss `-ln softmax(logits)[gold]` and its gradient `softmax(logits) - onehot(gold)`.
pub fn cross_entropy(logits: &[f64], gold: LabelClass) -> Result<(f64, Vec<f64>)> {
    check_finite(logits)?;
    let g = gold.index();
    if g >= logits.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("at least {} logits", g + 1),
            actual: format!("{} logits", logits.len()),
        });
    }
    let top = crate::prediction_store::argmax(logits);
    let max = logits[top];
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    // exps[top] == 1; summing the rest separately keeps tiny losses representable
    let rest: f64 = exps
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, e)| e)
        .sum();
    let loss = rest.ln_1p() + (max - logits[g]);
    let sum = 1.0 + rest;
    let mut grad: Vec<f64> = exps.into_iter().map(|e| e / sum).collect();
    grad[g] -= 1.0;
    Ok((loss, grad))
}
