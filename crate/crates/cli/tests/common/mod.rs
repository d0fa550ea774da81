//! Fixture experiment shared by the CLI tests: a separable synthetic corpus,
//! three reference models and two noisy external prediction files.

#![allow(dead_code)]

use std::fs::File;
use std::path::{Path, PathBuf};

use vitd_core::corpus::write_split;
use vitd_core::prediction_store::export_predictions;
use vitd_core::synthetic::{noisy_predictions, separable_split};
use vitd_core::{SplitFormat, SplitSchema};

pub const MEMBERS: [&str; 5] = ["ref-words", "ref-chars", "ref-mixed", "ext-strong", "ext-weak"];

const CONFIG: &str = r#"
seed = 13
output_dir = "out"

[data]
format = "tsv"
train = "data/train.tsv"
dev = "data/dev.tsv"
test = "data/test.tsv"

[featurizer]
dims_log2 = 14

[[models]]
id = "ref-words"
approach = "word unigrams"
[models.featurizer]
char_ngrams = false
[models.train]
learning_rate = 0.1
epochs = 10

[[models]]
id = "ref-chars"
approach = "char 2-4 grams"
[models.featurizer]
word_ngrams = false
[models.train]
learning_rate = 0.1
epochs = 10

[[models]]
id = "ref-mixed"
approach = "words + chars"
[models.featurizer]
dims_log2 = 16
[models.train]
learning_rate = 0.1
epochs = 10

[[external]]
id = "ext-strong"
approach = "external, 70% accurate"
[external.predictions]
dev = "external/ext-strong.dev.jsonl"
test = "external/ext-strong.test.jsonl"

[[external]]
id = "ext-weak"
approach = "external, 45% accurate"
[external.predictions]
dev = "external/ext-weak.dev.jsonl"
test = "external/ext-weak.test.jsonl"

[ensemble]
priority = ["ref-mixed", "ref-words", "ref-chars", "ext-strong", "ext-weak"]
grid_denominator = 20
bootstrap_resamples = 200
"#;

/// Writes data, external predictions and `experiment.toml` into `dir`.
pub fn write_fixture(dir: &Path) -> PathBuf {
    std::fs::create_dir_all(dir.join("data")).unwrap();
    std::fs::create_dir_all(dir.join("external")).unwrap();
    let schema = SplitSchema::default();
    let mut splits = Vec::new();
    for (name, n, seed) in [("train", 300, 1), ("dev", 90, 2), ("test", 90, 3)] {
        let split = separable_split(name, n, seed).unwrap();
        let file = File::create(dir.join(format!("data/{name}.tsv"))).unwrap();
        write_split(&split, file, SplitFormat::Tsv, &schema).unwrap();
        splits.push(split);
    }
    for (id, accuracy, seed) in [("ext-strong", 0.7, 11), ("ext-weak", 0.45, 12)] {
        for split in &splits[1..] {
            let records = noisy_predictions(split, id, accuracy, seed).unwrap();
            export_predictions(dir.join(format!("external/{id}.{}.jsonl", split.name())), &records).unwrap();
        }
    }
    let path = dir.join("experiment.toml");
    std::fs::write(&path, CONFIG).unwrap();
    path
}

/// Runs one command in-process with `--config` and `--out` filled in.
pub fn vitd(config: &Path, out: &Path, args: &[&str]) -> vitd_cli::CliResult<vitd_cli::RunManifest> {
    let mut argv = vec![
        "vitd".to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    argv.extend(args.iter().map(|a| a.to_string()));
    vitd_cli::run_args(argv, &mut std::io::sink())
}

/// The full pipeline in order.
pub const PIPELINE: &[&[&str]] = &[
    &["stats"],
    &["train"],
    &["predict"],
    &["import"],
    &["ensemble", "--split", "dev"],
    &["search-weights"],
    &["ensemble", "--split", "test", "--mode", "weighted"],
    &["ensemble", "--split", "test"],
    &["subsets", "--split", "dev"],
    &["evaluate", "--split", "test"],
];

pub fn run_pipeline(config: &Path, out: &Path) -> Vec<vitd_cli::RunManifest> {
    PIPELINE
        .iter()
        .map(|args| vitd(config, out, args).unwrap_or_else(|e| panic!("{args:?}: {e:#}")))
        .collect()
}
