//! Three-class violence-inciting text classification toolkit.
//!
//! The pipeline: load and normalize labelled splits ([`corpus`]), hash texts
//! into sparse n-gram vectors ([`featurizer`]), train a softmax-regression
//! reference model with AdamW ([`linear`]), exchange per-model predictions
//! with external systems ([`prediction_store`]), combine models by hard or
//! weighted voting ([`ensemble`]) and score with macro F1 ([`metrics`]).

pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod featurizer;
pub mod linear;
pub mod metrics;
pub mod prediction_store;
pub mod synthetic;

pub use corpus::{DatasetSplit, Example, LabelClass, SplitFormat, SplitSchema, SplitStats};
pub use ensemble::{EnsembleConfig, Priority, VoteMode, WeightSearchResult, WeightVector};
pub use error::{Error, Result};
pub use featurizer::{FeatureVector, FeaturizerConfig};
pub use linear::{ModelParams, TrainConfig, TrainedModel, TrainingLog};
pub use metrics::{ConfusionMatrix, EvalReport};
pub use prediction_store::{PredictionMatrix, PredictionRecord};

/// Toolkit version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
