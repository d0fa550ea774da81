//! Signed feature hashing of word and character n-grams.
//!
//! Every n-gram is encoded as the byte string `kind ‖ n ‖ utf8(gram)` where
//! `kind` is `b'w'` (word n-gram, tokens joined by a single space) or `b'c'`
//! (character n-gram over Unicode scalar values of the whole text), and `n` is
//! one byte. The key is hashed with XXH64 seeded by `hash_seed`; the bucket is
//! `hash mod 2^dims_log2` and the sign is `+1` when bit 63 is clear, `-1`
//! otherwise. XXH64 is fully specified and endian-independent, so vectors are
//! identical on every platform.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use xxhash_rust::xxh64::xxh64;

use crate::error::{Error, Result};

/// Name of the hash function recorded in model artifacts and run manifests.
pub const HASH_FUNCTION: &str = "xxh64";

pub const MIN_DIMS_LOG2: u32 = 8;
pub const MAX_DIMS_LOG2: u32 = 26;

/// Inclusive n-gram length range, serialized as `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", try_from = "[usize; 2]")]
pub struct NgramRange {
    min: usize,
    max: usize,
}

impl NgramRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min == 0 || min > max || max > 255 {
            return Err(Error::Argument(format!(
                "n-gram range [{min}, {max}] must satisfy 1 <= min <= max <= 255"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> usize {
        self.min
    }

    pub fn max(&self) -> usize {
        self.max
    }

    pub fn lengths(&self) -> std::ops::RangeInclusive<usize> {
        self.min..=self.max
    }
}

impl From<NgramRange> for [usize; 2] {
    fn from(r: NgramRange) -> Self {
        [r.min, r.max]
    }
}

impl TryFrom<[usize; 2]> for NgramRange {
    type Error = Error;

    fn try_from([min, max]: [usize; 2]) -> Result<Self> {
        NgramRange::new(min, max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TfScaling {
    /// sign(v)
    Binary,
    /// sign(v) * ln(1 + |v|)
    Log1pCount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturizerConfig {
    pub dims_log2: u32,
    /// `None` disables word n-grams.
    pub word_ngrams: Option<NgramRange>,
    /// `None` disables character n-grams.
    pub char_ngrams: Option<NgramRange>,
    pub hash_seed: u64,
    pub tf_scaling: TfScaling,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self {
            dims_log2: 18,
            word_ngrams: Some(NgramRange { min: 1, max: 1 }),
            char_ngrams: Some(NgramRange { min: 2, max: 4 }),
            hash_seed: 0,
            tf_scaling: TfScaling::Log1pCount,
        }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_DIMS_LOG2..=MAX_DIMS_LOG2).contains(&self.dims_log2) {
            return Err(Error::Argument(format!(
                "dims_log2 must be in [{MIN_DIMS_LOG2}, {MAX_DIMS_LOG2}], got {}",
                self.dims_log2
            )));
        }
        if self.word_ngrams.is_none() && self.char_ngrams.is_none() {
            return Err(Error::Argument(
                "at least one of word_ngrams / char_ngrams must be enabled".into(),
            ));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        1usize << self.dims_log2
    }

    /// SHA-256 (hex) of the canonical JSON encoding; stored alongside trained parameters.
    pub fn identity_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&Sha256::digest(&canonical))
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sparse vector with strictly increasing indices and finite, non-zero values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dims: usize,
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    /// Checks the sparse-vector invariants.
    pub fn from_entries(dims: usize, entries: Vec<(u32, f64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Argument("feature indices must be strictly increasing".into()));
        }
        if let Some(&(i, v)) = entries.iter().find(|&&(i, v)| i as usize >= dims || !v.is_finite()) {
            return Err(Error::Argument(format!("invalid feature entry ({i}, {v}) for {dims} dims")));
        }
        Ok(Self { dims, entries })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dot product with a dense row of length `dims`.
    pub fn dot(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.dims);
        self.entries
            .iter()
            .map(|&(i, v)| row[i as usize] * v)
            .sum()
    }
}

/// Hash key bytes for one n-gram.
fn gram_key(kind: u8, n: usize, gram: &str) -> Vec<u8> {
    let mut key = Vec::with_capacity(gram.len() + 2);
    key.push(kind);
    key.push(n as u8);
    key.extend_from_slice(gram.as_bytes());
    key
}

/// Calls `f` once per extracted n-gram with its hash key.
fn for_each_gram(text: &str, config: &FeaturizerConfig, mut f: impl FnMut(&[u8])) {
    if let Some(range) = config.word_ngrams {
        let words: Vec<&str> = text.split_whitespace().collect();
        for n in range.lengths() {
            for window in words.windows(n) {
                f(&gram_key(b'w', n, &window.join(" ")));
            }
        }
    }
    if let Some(range) = config.char_ngrams {
        let boundaries: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        let chars = boundaries.len() - 1;
        for n in range.lengths() {
            if n > chars {
                break;
            }
            for start in 0..=chars - n {
                let gram = &text[boundaries[start]..boundaries[start + n]];
                f(&gram_key(b'c', n, gram));
            }
        }
    }
}

/// Number of n-grams `featurize` extracts from `text` (an upper bound on its nnz).
pub fn ngram_count(text: &str, config: &FeaturizerConfig) -> usize {
    let mut count = 0;
    for_each_gram(text, config, |_| count += 1);
    count
}

/// `(bucket, sign)` for one hash key.
pub fn hash_bucket(key: &[u8], config: &FeaturizerConfig) -> (u32, f64) {
    let h = xxh64(key, config.hash_seed);
    let bucket = (h & (config.dims() as u64 - 1)) as u32;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

/// Maps normalized text to a hashed n-gram vector.
pub fn featurize(text: &str, config: &FeaturizerConfig) -> FeatureVector {
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    for_each_gram(text, config, |key| {
        let (bucket, sign) = hash_bucket(key, config);
        *acc.entry(bucket).or_insert(0.0) += sign;
    });
    let entries = acc
        .into_iter()
        .filter(|&(_, v)| v != 0.0)
        .map(|(i, v)| {
            let scaled = match config.tf_scaling {
                TfScaling::Binary => v.signum(),
                TfScaling::Log1pCount => v.signum() * v.abs().ln_1p(),
            };
            (i, scaled)
        })
        .collect();
    FeatureVector {
        dims: config.dims(),
        entries,
    }
}
