//! Labelled text datasets: loading, normalization, statistics and subsampling.
//!
//! A split is an ordered list of [`Example`]s read from a TSV, CSV or JSON-lines
//! file. Every text is passed through [`normalize_text`] on load, and rows
//! without an id receive a synthesized `row-NNNNNN` id so that prediction files
//! always have a stable join key.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// The three-way violence label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum LabelClass {
    NonViolence = 0,
    PassiveViolence = 1,
    DirectViolence = 2,
}

impl LabelClass {
    pub const COUNT: usize = 3;
    pub const ALL: [LabelClass; 3] = [
        LabelClass::NonViolence,
        LabelClass::PassiveViolence,
        LabelClass::DirectViolence,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LabelClass::NonViolence => "Non-Violence",
            LabelClass::PassiveViolence => "Passive Violence",
            LabelClass::DirectViolence => "Direct Violence",
        }
    }
}

impl fmt::Display for LabelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl TryFrom<i64> for LabelClass {
    type Error = Error;

    fn try_from(code: i64) -> Result<Self> {
        match code {
            0 => Ok(LabelClass::NonViolence),
            1 => Ok(LabelClass::PassiveViolence),
            2 => Ok(LabelClass::DirectViolence),
            other => Err(Error::Argument(format!(
                "label {other} is outside {{0, 1, 2}}"
            ))),
        }
    }
}

impl TryFrom<u8> for LabelClass {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self> {
        LabelClass::try_from(i64::from(code))
    }
}

impl From<LabelClass> for u8 {
    fn from(label: LabelClass) -> u8 {
        label.code()
    }
}

/// One text with an optional gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub label: Option<LabelClass>,
}

/// A named, ordered collection of examples with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    name: String,
    examples: Vec<Example>,
}

impl DatasetSplit {
    /// Builds a split, rejecting empty or duplicate ids.
    pub fn new(name: impl Into<String>, examples: Vec<Example>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for (i, example) in examples.iter().enumerate() {
            if example.id.is_empty() {
                return Err(Error::Schema {
                    row: i + 1,
                    message: "example id is empty".into(),
                });
            }
            if !seen.insert(example.id.as_str()) {
                return Err(Error::DuplicateId {
                    row: i + 1,
                    id: example.id.clone(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            examples,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// True iff every example carries a label (vacuously true when empty).
    pub fn labeled(&self) -> bool {
        self.examples.iter().all(|e| e.label.is_some())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.id.as_str())
    }

    /// Gold labels in split order, or [`Error::MissingGold`] if any example is unlabeled.
    pub fn gold_labels(&self) -> Result<Vec<LabelClass>> {
        self.examples
            .iter()
            .map(|e| e.label)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::MissingGold(self.name.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitFormat {
    Tsv,
    Csv,
    #[serde(alias = "jsonl")]
    JsonLines,
}

impl FromStr for SplitFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(SplitFormat::Tsv),
            "csv" => Ok(SplitFormat::Csv),
            "json-lines" | "jsonl" => Ok(SplitFormat::JsonLines),
            other => Err(Error::Argument(format!("unknown split format `{other}`"))),
        }
    }
}

/// Column (or JSON field) names used when reading and writing splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSchema {
    pub text: String,
    pub label: String,
    /// Optional id column; rows without one get a synthesized id.
    pub id: String,
    /// Accept texts that are empty after normalization.
    pub allow_empty: bool,
}

impl Default for SplitSchema {
    fn default() -> Self {
        Self {
            text: "text".into(),
            label: "label".into(),
            id: "id".into(),
            allow_empty: false,
        }
    }
}

/// Canonical text form: NFC composition, whitespace runs collapsed to one space, trimmed.
pub fn normalize_text(raw: &str) -> String {
    let composed: String = raw.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for token in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

pub fn synthesized_id(row: usize) -> String {
    format!("row-{row:06}")
}

pub fn load_split(
    name: &str,
    path: impl AsRef<Path>,
    format: SplitFormat,
    schema: &SplitSchema,
) -> Result<DatasetSplit> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_split(name, file, format, schema).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_split<R: Read>(
    name: &str,
    mut reader: R,
    format: SplitFormat,
    schema: &SplitSchema,
) -> Result<DatasetSplit> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<input>", e))?;
    let content = decode_utf8(&bytes)?;
    if content.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let rows = match format {
        SplitFormat::Tsv => parse_tsv(content, schema)?,
        SplitFormat::Csv => parse_csv(content, schema)?,
        SplitFormat::JsonLines => parse_json_lines(content)?,
    };
    build_split(name, rows, schema)
}

struct RawRow {
    row: usize,
    id: Option<String>,
    text: String,
    label: Option<LabelClass>,
}

fn decode_utf8(bytes: &[u8]) -> Result<&str> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::Parse {
            row: line,
            message: format!("invalid UTF-8 on line {line}"),
        }
    })
}

fn parse_label(row: usize, cell: &str) -> Result<Option<LabelClass>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let code: i64 = cell.parse().map_err(|_| Error::Schema {
        row,
        message: format!("label `{cell}` is not an integer"),
    })?;
    LabelClass::try_from(code)
        .map(Some)
        .map_err(|_| Error::Schema {
            row,
            message: format!("label {code} is outside {{0, 1, 2}}"),
        })
}

struct Columns {
    width: usize,
    text: usize,
    label: Option<usize>,
    id: Option<usize>,
}

impl Columns {
    fn from_header<'a>(header: impl Iterator<Item = &'a str>, schema: &SplitSchema) -> Result<Self> {
        let names: Vec<&str> = header.map(str::trim).collect();
        let find = |name: &str| names.iter().position(|&n| n == name);
        let text = find(&schema.text).ok_or_else(|| Error::Schema {
            row: 0,
            message: format!("header has no `{}` column", schema.text),
        })?;
        Ok(Self {
            width: names.len(),
            text,
            label: find(&schema.label),
            id: find(&schema.id),
        })
    }

    fn row(&self, row: usize, cells: &[&str]) -> Result<RawRow> {
        if cells.len() != self.width {
            return Err(Error::Parse {
                row,
                message: format!(
                    "expected {} columns, found {}",
                    self.width,
                    cells.len()
                ),
            });
        }
        let label = match self.label {
            Some(i) => parse_label(row, cells[i])?,
            None => None,
        };
        let id = self
            .id
            .map(|i| cells[i].trim())
            .filter(|id| !id.is_empty())
            .map(str::to_owned);
        Ok(RawRow {
            row,
            id,
            text: cells[self.text].to_owned(),
            label,
        })
    }
}

fn parse_tsv(content: &str, schema: &SplitSchema) -> Result<Vec<RawRow>> {
    let mut lines = content
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.is_empty());
    let header = lines.next().ok_or(Error::EmptyInput)?;
    let columns = Columns::from_header(header.split('\t'), schema)?;
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split('\t').collect();
            columns.row(i + 1, &cells)
        })
        .collect()
}

fn parse_csv(content: &str, schema: &SplitSchema) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(content.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let columns = Columns::from_header(header.iter(), schema)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let cells: Vec<&str> = record.iter().collect();
        rows.push(columns.row(row, &cells)?);
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct JsonRow {
    id: Option<String>,
    text: String,
    label: Option<i64>,
}

#[derive(Serialize)]
struct JsonRowOut<'a> {
    id: &'a str,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<LabelClass>,
}

fn parse_json_lines(content: &str) -> Result<Vec<RawRow>> {
    content
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let row = i + 1;
            let parsed: JsonRow = serde_json::from_str(line).map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            let label = parsed
                .label
                .map(|code| {
                    LabelClass::try_from(code).map_err(|_| Error::Schema {
                        row,
                        message: format!("label {code} is outside {{0, 1, 2}}"),
                    })
                })
                .transpose()?;
            Ok(RawRow {
                row,
                id: parsed.id.filter(|id| !id.is_empty()),
                text: parsed.text,
                label,
            })
        })
        .collect()
}

fn build_split(name: &str, rows: Vec<RawRow>, schema: &SplitSchema) -> Result<DatasetSplit> {
    let mut examples = Vec::with_capacity(rows.len());
    let mut seen = HashSet::with_capacity(rows.len());
    for raw in rows {
        let text = normalize_text(&raw.text);
        if text.is_empty() && !schema.allow_empty {
            return Err(Error::EmptyText { row: raw.row });
        }
        let id = raw.id.unwrap_or_else(|| synthesized_id(raw.row));
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { row: raw.row, id });
        }
        examples.push(Example {
            id,
            text,
            label: raw.label,
        });
    }
    DatasetSplit::new(name, examples)
}

/// Serializes a split so that [`read_split`] with the same schema reproduces it.
///
/// The id column is always written; the label column only when some example is labeled.
pub fn write_split<W: Write>(
    split: &DatasetSplit,
    writer: W,
    format: SplitFormat,
    schema: &SplitSchema,
) -> Result<()> {
    let with_labels = split.examples.iter().any(|e| e.label.is_some());
    let label_cell = |e: &Example| e.label.map(|l| l.to_string()).unwrap_or_default();
    match format {
        SplitFormat::Tsv => {
            let mut w = std::io::BufWriter::new(writer);
            let io = |e| Error::io("<output>", e);
            let mut header = vec![schema.id.as_str(), schema.text.as_str()];
            if with_labels {
                header.push(schema.label.as_str());
            }
            writeln!(w, "{}", header.join("\t")).map_err(io)?;
            for e in &split.examples {
                if e.text.contains(['\t', '\n', '\r']) || e.id.contains(['\t', '\n', '\r']) {
                    return Err(Error::Argument(format!(
                        "example `{}` cannot be written as TSV: contains tab or newline",
                        e.id
                    )));
                }
                if with_labels {
                    writeln!(w, "{}\t{}\t{}", e.id, e.text, label_cell(e)).map_err(io)?;
                } else {
                    writeln!(w, "{}\t{}", e.id, e.text).map_err(io)?;
                }
            }
            w.flush().map_err(io)
        }
        SplitFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            let csv_err = |e: csv::Error| Error::Argument(format!("CSV write failed: {e}"));
            let mut header = vec![schema.id.as_str(), schema.text.as_str()];
            if with_labels {
                header.push(schema.label.as_str());
            }
            w.write_record(&header).map_err(csv_err)?;
            for e in &split.examples {
                let label = label_cell(e);
                let mut record = vec![e.id.as_str(), e.text.as_str()];
                if with_labels {
                    record.push(&label);
                }
                w.write_record(&record).map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::io("<output>", e))
        }
        SplitFormat::JsonLines => {
            let mut w = std::io::BufWriter::new(writer);
            for e in &split.examples {
                let row = JsonRowOut {
                    id: &e.id,
                    text: &e.text,
                    label: e.label,
                };
                serde_json::to_writer(&mut w, &row)?;
                w.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
            }
            w.flush().map_err(|e| Error::io("<output>", e))
        }
    }
}

/// Summary statistics of a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub name: String,
    pub count: usize,
    pub labeled: bool,
    /// Empty unless the split is non-empty and fully labeled.
    pub per_class_counts: BTreeMap<LabelClass, usize>,
    pub per_class_fractions: BTreeMap<LabelClass, f64>,
    pub max_word_count: usize,
}

pub fn compute_stats(split: &DatasetSplit) -> SplitStats {
    let count = split.len();
    let labeled = split.labeled();
    let mut per_class_counts = BTreeMap::new();
    let mut per_class_fractions = BTreeMap::new();
    if labeled && count > 0 {
        for class in LabelClass::ALL {
            per_class_counts.insert(class, 0usize);
        }
        for label in split.examples.iter().filter_map(|e| e.label) {
            *per_class_counts.entry(label).or_default() += 1;
        }
        for (&class, &n) in &per_class_counts {
            per_class_fractions.insert(class, n as f64 / count as f64);
        }
    }
    let max_word_count = split
        .examples
        .iter()
        .map(|e| e.text.split_whitespace().count())
        .max()
        .unwrap_or(0);
    SplitStats {
        name: split.name.clone(),
        count,
        labeled,
        per_class_counts,
        per_class_fractions,
        max_word_count,
    }
}

/// Class-stratified, seeded subsample that keeps the input order.
///
/// Each class keeps `round(fraction * class_count)` examples.
pub fn stratified_subsample(split: &DatasetSplit, fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "subsample fraction must be in (0, 1], got {fraction}"
        )));
    }
    let gold = split.gold_labels()?;
    let mut keep = vec![false; split.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in LabelClass::ALL {
        let members: Vec<usize> = gold
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        let target = (fraction * members.len() as f64).round() as usize;
        for pick in rand::seq::index::sample(&mut rng, members.len(), target) {
            keep[members[pick]] = true;
        }
    }
    let examples = split
        .examples
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(e, _)| e.clone())
        .collect();
    DatasetSplit::new(split.name.clone(), examples)
}
