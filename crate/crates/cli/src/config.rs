//! Experiment configuration file.
//!
//! A single TOML file describes the data, the featurizer, the reference models
//! to train, externally produced prediction files and the ensemble. Relative
//! paths are resolved against the directory holding the config file. Missing
//! keys take the library defaults, and the resolved configuration is what gets
//! echoed into the run manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vitd_core::ensemble::{simplex_grid_size, MAX_GRID_POINTS};
use vitd_core::{FeaturizerConfig, Priority, SplitFormat, SplitSchema, TrainConfig, VoteMode};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Dev, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    data: RawData,
    #[serde(default)]
    featurizer: toml::Table,
    #[serde(default)]
    models: Vec<RawModel>,
    #[serde(default)]
    external: Vec<RawExternal>,
    #[serde(default)]
    ensemble: EnsembleSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    format: SplitFormat,
    train: Option<PathBuf>,
    dev: Option<PathBuf>,
    test: Option<PathBuf>,
    #[serde(default)]
    schema: SplitSchema,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    id: String,
    #[serde(default = "default_approach")]
    approach: String,
    #[serde(default)]
    featurizer: toml::Table,
    #[serde(default)]
    train: toml::Table,
}

fn default_approach() -> String {
    "hashed n-gram softmax regression".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExternal {
    id: String,
    #[serde(default = "default_external_approach")]
    approach: String,
    predictions: BTreeMap<SplitName, PathBuf>,
}

fn default_external_approach() -> String {
    "external".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    /// Members in model order; all configured models when absent.
    pub models: Option<Vec<String>>,
    /// Tie-break order over the members; member order when absent.
    pub priority: Option<Vec<String>>,
    pub mode: VoteMode,
    /// Weight-search grid step is `1 / grid_denominator`.
    pub grid_denominator: u32,
    pub bootstrap_resamples: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            models: None,
            priority: None,
            mode: VoteMode::Hard,
            grid_denominator: 20,
            bootstrap_resamples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSection {
    pub format: SplitFormat,
    pub paths: BTreeMap<SplitName, PathBuf>,
    pub schema: SplitSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceModel {
    pub id: String,
    pub approach: String,
    pub featurizer: FeaturizerConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalModel {
    pub id: String,
    pub approach: String,
    pub predictions: BTreeMap<SplitName, PathBuf>,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataSection,
    pub featurizer: FeaturizerConfig,
    pub models: Vec<ReferenceModel>,
    pub external: Vec<ExternalModel>,
    pub ensemble: EnsembleSection,
    /// Ensemble members after defaulting.
    pub members: Vec<String>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> CliResult<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::usage(e.to_string()))?;
        let seed = overrides.seed.unwrap_or(raw.seed);
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

        let featurizer: FeaturizerConfig = overlay(&FeaturizerConfig::default(), &raw.featurizer, "featurizer")?;
        featurizer.validate().map_err(|e| CliError::usage(format!("featurizer: {e}")))?;

        let mut paths = BTreeMap::new();
        for (name, p) in [
            (SplitName::Train, &raw.data.train),
            (SplitName::Dev, &raw.data.dev),
            (SplitName::Test, &raw.data.test),
        ] {
            if let Some(p) = p {
                paths.insert(name, resolve(p));
            }
        }

        let mut models = Vec::new();
        for m in &raw.models {
            let what = format!("models.{}", m.id);
            let fz: FeaturizerConfig = overlay(&featurizer, &m.featurizer, &format!("{what}.featurizer"))?;
            fz.validate().map_err(|e| CliError::usage(format!("{what}.featurizer: {e}")))?;
            let base_train = TrainConfig { seed, ..TrainConfig::default() };
            let train: TrainConfig = overlay(&base_train, &m.train, &format!("{what}.train"))?;
            train.validate().map_err(|e| CliError::usage(format!("{what}.train: {e}")))?;
            models.push(ReferenceModel { id: m.id.clone(), approach: m.approach.clone(), featurizer: fz, train });
        }
        let external: Vec<ExternalModel> = raw
            .external
            .iter()
            .map(|x| ExternalModel {
                id: x.id.clone(),
                approach: x.approach.clone(),
                predictions: x.predictions.iter().map(|(&s, p)| (s, resolve(p))).collect(),
            })
            .collect();

        let all_ids: Vec<String> = models.iter().map(|m| m.id.clone()).chain(external.iter().map(|x| x.id.clone())).collect();
        let members = raw.ensemble.models.clone().unwrap_or_else(|| all_ids.clone());
        let config = ExperimentConfig {
            seed,
            output_dir: overrides.output_dir.clone().unwrap_or_else(|| resolve(&raw.output_dir)),
            data: DataSection { format: raw.data.format, paths, schema: raw.data.schema },
            featurizer,
            models,
            external,
            ensemble: raw.ensemble,
            members,
        };
        config.validate(&all_ids)?;
        Ok(config)
    }

    fn validate(&self, all_ids: &[String]) -> CliResult<()> {
        let mut seen = std::collections::HashSet::new();
        for id in all_ids {
            let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
            if !ok {
                return Err(CliError::usage(format!(
                    "model id `{id}` must be non-empty ASCII letters, digits, `.`, `_` or `-`"
                )));
            }
            if !seen.insert(id) {
                return Err(CliError::usage(format!("model id `{id}` is used twice")));
            }
        }
        for (split, path) in &self.data.paths {
            require_file(path, &format!("data.{split}"))?;
        }
        for x in &self.external {
            if x.predictions.is_empty() {
                return Err(CliError::usage(format!("external model `{}` lists no prediction files", x.id)));
            }
            for (split, path) in &x.predictions {
                require_file(path, &format!("external.{}.predictions.{split}", x.id))?;
            }
        }
        for id in &self.members {
            if !all_ids.contains(id) {
                return Err(CliError::usage(format!("ensemble.models names unknown model `{id}`")));
            }
        }
        if let Some(order) = &self.ensemble.priority {
            Priority::from_order(order, &self.members).map_err(|e| CliError::usage(format!("ensemble.priority: {e}")))?;
        }
        let q = self.ensemble.grid_denominator;
        if q == 0 {
            return Err(CliError::usage("ensemble.grid_denominator must be at least 1"));
        }
        if !self.members.is_empty() {
            match simplex_grid_size(self.members.len(), q) {
                Some(n) if n <= MAX_GRID_POINTS => {}
                _ => {
                    return Err(CliError::usage(format!(
                        "ensemble.grid_denominator {q} with {} models exceeds {MAX_GRID_POINTS} grid points",
                        self.members.len()
                    )))
                }
            }
        }
        if self.ensemble.bootstrap_resamples == 0 {
            return Err(CliError::usage("ensemble.bootstrap_resamples must be at least 1"));
        }
        Ok(())
    }

    pub fn reference(&self, id: &str) -> Option<&ReferenceModel> {
        self.models.iter().find(|m| m.id == id)
    }

    pub fn external_model(&self, id: &str) -> Option<&ExternalModel> {
        self.external.iter().find(|m| m.id == id)
    }

    pub fn approach(&self, id: &str) -> &str {
        self.reference(id)
            .map(|m| m.approach.as_str())
            .or_else(|| self.external_model(id).map(|m| m.approach.as_str()))
            .unwrap_or("")
    }

    pub fn split_path(&self, split: SplitName) -> CliResult<&Path> {
        self.data
            .paths
            .get(&split)
            .map(PathBuf::as_path)
            .ok_or_else(|| CliError::usage(format!("config has no data.{split} path")))
    }

    pub fn model_path(&self, id: &str) -> PathBuf {
        self.output_dir.join("models").join(format!("{id}.model.json"))
    }

    pub fn train_log_path(&self, id: &str) -> PathBuf {
        self.output_dir.join("models").join(format!("{id}.train-log.jsonl"))
    }

    pub fn predictions_path(&self, id: &str, split: SplitName) -> PathBuf {
        self.output_dir.join("predictions").join(format!("{id}.{split}.jsonl"))
    }

    pub fn weights_path(&self) -> PathBuf {
        self.output_dir.join("weights.json")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.output_dir.join("manifest.jsonl")
    }
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{what}: no such file {}", path.display())))
    }
}

/// Deserializes `base` with the keys of `table` laid over it.
///
/// `false` for an n-gram range disables that extractor.
fn overlay<T: Serialize + serde::de::DeserializeOwned>(base: &T, table: &toml::Table, what: &str) -> CliResult<T> {
    let mut merged = serde_json::to_value(base).expect("config serializes");
    let obj = merged.as_object_mut().expect("config is a struct");
    for (key, value) in table {
        let value = match value {
            toml::Value::Boolean(false) if key.ends_with("_ngrams") => Value::Null,
            other => serde_json::to_value(other).map_err(|e| CliError::usage(format!("{what}.{key}: {e}")))?,
        };
        obj.insert(key.clone(), value);
    }
    serde_json::from_value(merged).map_err(|e| CliError::usage(format!("{what}: {e}")))
}
