//! Writes a small self-contained experiment: a separable synthetic corpus,
//! two noisy external prediction files and `experiment.toml`.
//!
//! ```text
//! cargo run -p vitd-core --example make_fixture -- demo
//! cargo run -p vitd-cli -- --config demo/experiment.toml stats
//! ```

use std::fs::{self, File};
use std::path::PathBuf;

use vitd_core::corpus::write_split;
use vitd_core::prediction_store::export_predictions;
use vitd_core::synthetic::{noisy_predictions, separable_split};
use vitd_core::{SplitFormat, SplitSchema};

const CONFIG: &str = r#"seed = 7
output_dir = "out"

[data]
format = "tsv"
train = "data/train.tsv"
dev = "data/dev.tsv"
test = "data/test.tsv"

[featurizer]
dims_log2 = 16

[[models]]
id = "ref-words"
approach = "word unigrams"
[models.featurizer]
char_ngrams = false
[models.train]
learning_rate = 0.1

[[models]]
id = "ref-chars"
approach = "char 2-4 grams"
[models.featurizer]
word_ngrams = false
[models.train]
learning_rate = 0.1

[[models]]
id = "ref-mixed"
approach = "words + chars"
[models.train]
learning_rate = 0.1

[[external]]
id = "ext-a"
approach = "external (70%)"
[external.predictions]
dev = "external/ext-a.dev.jsonl"
test = "external/ext-a.test.jsonl"

[[external]]
id = "ext-b"
approach = "external (50%)"
[external.predictions]
dev = "external/ext-b.dev.jsonl"
test = "external/ext-b.test.jsonl"

[ensemble]
priority = ["ref-mixed", "ref-words", "ref-chars", "ext-a", "ext-b"]
grid_denominator = 20
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    fs::create_dir_all(root.join("data"))?;
    fs::create_dir_all(root.join("external"))?;
    let mut splits = Vec::new();
    for (name, n, seed) in [("train", 300, 1), ("dev", 90, 2), ("test", 90, 3)] {
        let split = separable_split(name, n, seed)?;
        write_split(&split, File::create(root.join(format!("data/{name}.tsv")))?, SplitFormat::Tsv, &SplitSchema::default())?;
        splits.push(split);
    }
    for (id, accuracy, seed) in [("ext-a", 0.7, 11), ("ext-b", 0.5, 12)] {
        for split in &splits[1..] {
            let records = noisy_predictions(split, id, accuracy, seed)?;
            export_predictions(root.join(format!("external/{id}.{}.jsonl", split.name())), &records)?;
        }
    }
    fs::write(root.join("experiment.toml"), CONFIG)?;
    println!("wrote {}", root.join("experiment.toml").display());
    Ok(())
}
