//! JSON model artifact.
//!
//! `parameters` holds base64 of little-endian IEEE-754 doubles: the weight
//! matrix row by row (class 0 first), followed by the three biases.

use std::io::{Read, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{ModelParams, TrainConfig, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::featurizer::{FeaturizerConfig, HASH_FUNCTION};

pub const ARTIFACT_FORMAT: &str = "vitd-linear/1";
const ENCODING: &str = "f64-le-base64";

/// Trained parameters together with everything needed to reuse them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model_id: String,
    pub featurizer: FeaturizerConfig,
    pub train_config: TrainConfig,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Artifact {
    format: String,
    model_id: String,
    classes: usize,
    dims: usize,
    hash_function: String,
    featurizer: FeaturizerConfig,
    featurizer_hash: String,
    train_config: TrainConfig,
    encoding: String,
    parameters: String,
}

pub fn write_model<W: Write>(writer: W, model: &TrainedModel) -> Result<()> {
    let p = &model.params;
    if p.dims() != model.featurizer.dims() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} dims", model.featurizer.dims()),
            actual: format!("{} dims", p.dims()),
        });
    }
    let mut bytes = Vec::with_capacity((p.weights().len() + NUM_CLASSES) * 8);
    for v in p.weights().iter().chain(p.bias()) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let artifact = Artifact {
        format: ARTIFACT_FORMAT.into(),
        model_id: model.model_id.clone(),
        classes: NUM_CLASSES,
        dims: p.dims(),
        hash_function: HASH_FUNCTION.into(),
        featurizer: model.featurizer.clone(),
        featurizer_hash: model.featurizer.identity_hash(),
        train_config: model.train_config.clone(),
        encoding: ENCODING.into(),
        parameters: STANDARD.encode(&bytes),
    };
    let mut w = std::io::BufWriter::new(writer);
    serde_json::to_writer_pretty(&mut w, &artifact)?;
    w.write_all(b"\n").map_err(|e| Error::io("<model>", e))?;
    w.flush().map_err(|e| Error::io("<model>", e))
}

pub fn read_model<R: Read>(reader: R) -> Result<TrainedModel> {
    let a: Artifact = serde_json::from_reader(std::io::BufReader::new(reader))?;
    let bad = |msg: String| Err(Error::Artifact(msg));
    if a.format != ARTIFACT_FORMAT {
        return bad(format!("unsupported format `{}`", a.format));
    }
    if a.classes != NUM_CLASSES {
        return bad(format!("expected {NUM_CLASSES} classes, found {}", a.classes));
    }
    if a.hash_function != HASH_FUNCTION {
        return bad(format!("unsupported hash function `{}`", a.hash_function));
    }
    if a.encoding != ENCODING {
        return bad(format!("unsupported encoding `{}`", a.encoding));
    }
    a.featurizer.validate()?;
    if a.dims != a.featurizer.dims() {
        return bad(format!(
            "dims {} disagree with featurizer dims {}",
            a.dims,
            a.featurizer.dims()
        ));
    }
    if a.featurizer_hash != a.featurizer.identity_hash() {
        return bad("featurizer hash does not match featurizer config".into());
    }
    let bytes = STANDARD
        .decode(a.parameters.as_bytes())
        .map_err(|e| Error::Artifact(format!("parameters: {e}")))?;
    let expected = (NUM_CLASSES * a.dims + NUM_CLASSES) * 8;
    if bytes.len() != expected {
        return bad(format!("expected {expected} parameter bytes, found {}", bytes.len()));
    }
    let mut values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let bias_start = values.len() - NUM_CLASSES;
    let bias: [f64; NUM_CLASSES] = values[bias_start..].try_into().expect("three biases");
    values.truncate(bias_start);
    let params = ModelParams::from_parts(a.dims, values, bias)?;
    Ok(TrainedModel {
        model_id: a.model_id,
        featurizer: a.featurizer,
        train_config: a.train_config,
        params,
    })
}

pub fn save_model(path: impl AsRef<Path>, model: &TrainedModel) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(file, model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(file)
}
