//! Per-model predictions: the JSON-lines exchange format and the complete
//! models × examples matrix consumed by the ensemble.
//!
//! Wire format, one UTF-8 object per LF-terminated line:
//!
//! ```text
//! {"example_id":"row-000001","model_id":"banglabert","logits":[0.1,2.0,-1.0],"label":1}
//! ```
//!
//! `logits` (three finite numbers, unnormalized scores) and `label` (0, 1 or 2)
//! are each optional but at least one must be present. When both are present
//! the label must equal the logits argmax, ties going to the lowest index.
//! The writer always emits `label`.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetSplit, LabelClass};
use crate::error::{Error, Result};

pub type Logits = [f64; LabelClass::COUNT];

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn argmax_label(logits: &Logits) -> LabelClass {
    LabelClass::ALL[argmax(logits)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub example_id: String,
    pub model_id: String,
    pub logits: Option<Logits>,
    pub label: LabelClass,
}

impl PredictionRecord {
    pub fn from_logits(
        example_id: impl Into<String>,
        model_id: impl Into<String>,
        logits: Logits,
    ) -> Result<Self> {
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite logits {logits:?}")));
        }
        Ok(Self {
            example_id: example_id.into(),
            model_id: model_id.into(),
            label: argmax_label(&logits),
            logits: Some(logits),
        })
    }

    pub fn from_label(
        example_id: impl Into<String>,
        model_id: impl Into<String>,
        label: LabelClass,
    ) -> Self {
        Self {
            example_id: example_id.into(),
            model_id: model_id.into(),
            logits: None,
            label,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireIn {
    example_id: String,
    model_id: String,
    #[serde(default)]
    logits: Option<Vec<f64>>,
    #[serde(default)]
    label: Option<i64>,
}

#[derive(Serialize)]
struct WireOut<'a> {
    example_id: &'a str,
    model_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    logits: Option<&'a Logits>,
    label: LabelClass,
}

fn decode_line(line_no: usize, line: &str) -> Result<PredictionRecord> {
    let parse_err = |message: String| Error::Parse {
        row: line_no,
        message,
    };
    let wire: WireIn = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
    if wire.example_id.is_empty() || wire.model_id.is_empty() {
        return Err(parse_err("example_id and model_id must be non-empty".into()));
    }
    let logits: Option<Logits> = match wire.logits {
        None => None,
        Some(v) => {
            let arr: Logits = v.as_slice().try_into().map_err(|_| {
                parse_err(format!("logits must have {} entries, found {}", LabelClass::COUNT, v.len()))
            })?;
            if arr.iter().any(|x| !x.is_finite()) {
                return Err(parse_err("logits must be finite".into()));
            }
            Some(arr)
        }
    };
    let label = wire
        .label
        .map(|code| {
            LabelClass::try_from(code).map_err(|_| Error::Schema {
                row: line_no,
                message: format!("label {code} is outside {{0, 1, 2}}"),
            })
        })
        .transpose()?;
    let label = match (label, &logits) {
        (None, None) => return Err(parse_err("record needs `logits`, `label` or both".into())),
        (Some(label), None) => label,
        (None, Some(l)) => argmax_label(l),
        (Some(label), Some(l)) => {
            let argmax = argmax_label(l);
            if label != argmax {
                return Err(Error::InconsistentPrediction {
                    line: line_no,
                    label,
                    argmax,
                });
            }
            label
        }
    };
    Ok(PredictionRecord {
        example_id: wire.example_id,
        model_id: wire.model_id,
        logits,
        label,
    })
}

/// Parses a predictions stream, checking syntax, label/logits consistency and
/// duplicate `(model_id, example_id)` cells. Blank lines are skipped.
pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<PredictionRecord>> {
    let reader = BufReader::new(reader);
    let mut records = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::Parse {
                row: line_no,
                message: "invalid UTF-8".into(),
            },
            _ => Error::io("<predictions>", e),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = decode_line(line_no, &line)?;
        if !seen.insert((record.model_id.clone(), record.example_id.clone())) {
            return Err(Error::DuplicatePrediction {
                line: line_no,
                model_id: record.model_id,
                example_id: record.example_id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Fails with every distinct example id (first-appearance order) not present in `split`.
pub fn check_references(records: &[PredictionRecord], split: &DatasetSplit) -> Result<()> {
    let known: HashSet<&str> = split.ids().collect();
    let mut reported = HashSet::new();
    let unknown: Vec<String> = records
        .iter()
        .map(|r| r.example_id.as_str())
        .filter(|id| !known.contains(id) && reported.insert(*id))
        .map(str::to_owned)
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(Error::UnknownExampleIds { ids: unknown })
    }
}

/// Reads a predictions file and validates it against the split it claims to cover.
///
/// All-or-nothing: any error discards the whole file.
pub fn import_predictions(path: impl AsRef<Path>, expected: &DatasetSplit) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let records = read_predictions(file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    check_references(&records, expected)?;
    Ok(records)
}

pub fn write_predictions<W: Write>(writer: W, records: &[PredictionRecord]) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    let io = |e| Error::io("<predictions>", e);
    for r in records {
        if let Some(logits) = &r.logits {
            if logits.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite logits for example `{}`",
                    r.example_id
                )));
            }
            if argmax_label(logits) != r.label {
                return Err(Error::InconsistentPrediction {
                    line: 0,
                    label: r.label,
                    argmax: argmax_label(logits),
                });
            }
        }
        let wire = WireOut {
            example_id: &r.example_id,
            model_id: &r.model_id,
            logits: r.logits.as_ref(),
            label: r.label,
        };
        serde_json::to_writer(&mut w, &wire)?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn export_predictions(path: impl AsRef<Path>, records: &[PredictionRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_predictions(file, records)
}

/// Complete grid of labels (and optionally logits), models × examples.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    model_ids: Vec<String>,
    example_ids: Vec<String>,
    /// Model-major, `labels[m * n_examples + e]`.
    labels: Vec<LabelClass>,
    logits: Option<Vec<Logits>>,
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Argument(format!("duplicate {what} `{id}`")));
        }
    }
    Ok(())
}

impl PredictionMatrix {
    /// Builds a label-only matrix from one row of labels per model.
    pub fn from_rows(
        model_ids: Vec<String>,
        example_ids: Vec<String>,
        rows: Vec<Vec<LabelClass>>,
    ) -> Result<Self> {
        check_unique(&model_ids, "model id")?;
        check_unique(&example_ids, "example id")?;
        if rows.len() != model_ids.len() || rows.iter().any(|r| r.len() != example_ids.len()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x {}", model_ids.len(), example_ids.len()),
                actual: format!(
                    "{} rows of lengths {:?}",
                    rows.len(),
                    rows.iter().map(Vec::len).collect::<Vec<_>>()
                ),
            });
        }
        Ok(Self {
            model_ids,
            example_ids,
            labels: rows.into_iter().flatten().collect(),
            logits: None,
        })
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn example_ids(&self) -> &[String] {
        &self.example_ids
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn n_examples(&self) -> usize {
        self.example_ids.len()
    }

    pub fn has_logits(&self) -> bool {
        self.logits.is_some()
    }

    pub fn label(&self, model: usize, example: usize) -> LabelClass {
        self.labels[model * self.n_examples() + example]
    }

    pub fn logits(&self, model: usize, example: usize) -> Option<Logits> {
        self.logits
            .as_ref()
            .map(|l| l[model * self.n_examples() + example])
    }

    /// All labels emitted by one model, in example order.
    pub fn row(&self, model: usize) -> &[LabelClass] {
        let n = self.n_examples();
        &self.labels[model * n..(model + 1) * n]
    }

    /// Writes every model's vote on one example into `out` (model order).
    pub fn column_into(&self, example: usize, out: &mut Vec<LabelClass>) {
        out.clear();
        out.extend((0..self.n_models()).map(|m| self.label(m, example)));
    }

    pub fn column(&self, example: usize) -> Vec<LabelClass> {
        let mut out = Vec::with_capacity(self.n_models());
        self.column_into(example, &mut out);
        out
    }

    /// Matrix restricted to the given model indices, in the given order.
    pub fn select_models(&self, models: &[usize]) -> PredictionMatrix {
        let n = self.n_examples();
        let labels = models
            .iter()
            .flat_map(|&m| self.row(m).iter().copied())
            .collect();
        let logits = self.logits.as_ref().map(|l| {
            models
                .iter()
                .flat_map(|&m| l[m * n..(m + 1) * n].iter().copied())
                .collect()
        });
        PredictionMatrix {
            model_ids: models.iter().map(|&m| self.model_ids[m].clone()).collect(),
            example_ids: self.example_ids.clone(),
            labels,
            logits,
        }
    }

    /// One record per cell, model-major.
    pub fn to_records(&self) -> Vec<PredictionRecord> {
        let mut records = Vec::with_capacity(self.labels.len());
        for (m, model_id) in self.model_ids.iter().enumerate() {
            for (e, example_id) in self.example_ids.iter().enumerate() {
                records.push(PredictionRecord {
                    example_id: example_id.clone(),
                    model_id: model_id.clone(),
                    logits: self.logits(m, e),
                    label: self.label(m, e),
                });
            }
        }
        records
    }
}

/// Arranges records into a matrix ordered by `model_ids` and split example order.
///
/// Records for other models or examples are ignored. Logits are kept only if
/// every cell has them.
pub fn assemble_matrix(
    records: &[PredictionRecord],
    model_ids: &[String],
    split: &DatasetSplit,
) -> Result<PredictionMatrix> {
    if model_ids.is_empty() {
        return Err(Error::Argument("at least one model is required".into()));
    }
    check_unique(model_ids, "model id")?;
    let example_ids: Vec<String> = split.ids().map(str::to_owned).collect();
    let model_index: HashMap<&str, usize> = model_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let example_index: HashMap<&str, usize> = example_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let n = example_ids.len();
    let mut cells: Vec<Option<&PredictionRecord>> = vec![None; model_ids.len() * n];
    for (i, r) in records.iter().enumerate() {
        let (Some(&m), Some(&e)) = (
            model_index.get(r.model_id.as_str()),
            example_index.get(r.example_id.as_str()),
        ) else {
            continue;
        };
        let slot = &mut cells[m * n + e];
        if slot.is_some() {
            return Err(Error::DuplicatePrediction {
                line: i + 1,
                model_id: r.model_id.clone(),
                example_id: r.example_id.clone(),
            });
        }
        *slot = Some(r);
    }
    if let Some(missing) = cells.iter().position(Option::is_none) {
        return Err(Error::Incomplete {
            model_id: model_ids[missing / n.max(1)].clone(),
            example_id: example_ids[missing % n.max(1)].clone(),
        });
    }
    let cells: Vec<&PredictionRecord> = cells.into_iter().map(Option::unwrap).collect();
    let labels = cells.iter().map(|r| r.label).collect();
    let logits = cells.iter().map(|r| r.logits).collect::<Option<Vec<_>>>();
    Ok(PredictionMatrix {
        model_ids: model_ids.to_vec(),
        example_ids,
        labels,
        logits,
    })
}
