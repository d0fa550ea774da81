//! Voting ensembles over a [`PredictionMatrix`].
//!
//! Hard voting returns the most frequent label. Weighted voting sums a
//! non-negative weight per model for the label it voted for and returns the
//! heaviest label; it operates on hard labels, never on averaged
//! probabilities. In both rules a tie is settled by the highest-priority
//! model that voted for one of the tied labels (for weighted voting, only
//! models with positive weight arbitrate).
//!
//! Weights for the weighted rule are chosen by exhaustive search over the
//! probability simplex discretized at step `1/q`, scored by dev macro F1.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::LabelClass;
use crate::error::{Error, Result};
use crate::metrics;
use crate::prediction_store::PredictionMatrix;

const K: usize = LabelClass::COUNT;

/// Two weighted scores closer than this are a tie.
pub const SCORE_TIE_TOLERANCE: f64 = 1e-12;

/// Largest simplex grid `search_weights` will enumerate.
pub const MAX_GRID_POINTS: u64 = 1_000_000;

/// Largest model count `subset_ensembles` accepts.
pub const MAX_SUBSET_MODELS: usize = 20;

/// Tie-breaking authority: model indices, highest priority first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Priority(Vec<usize>);

impl Priority {
    /// Model order is priority order.
    pub fn identity(models: usize) -> Self {
        Priority((0..models).collect())
    }

    /// Resolves an ordering of model ids, which must be a permutation of `model_ids`.
    pub fn from_order(order: &[String], model_ids: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = model_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut seen = vec![false; model_ids.len()];
        let mut out = Vec::with_capacity(order.len());
        for id in order {
            let &i = index
                .get(id.as_str())
                .ok_or_else(|| Error::Argument(format!("priority order names unknown model `{id}`")))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Argument(format!("priority order lists `{id}` twice")));
            }
            out.push(i);
        }
        if out.len() != model_ids.len() {
            return Err(Error::Argument(format!(
                "priority order must list all {} models, got {}",
                model_ids.len(),
                out.len()
            )));
        }
        Ok(Priority(out))
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Priority over a subset of models, re-indexed to positions within `subset`.
    pub fn restrict(&self, subset: &[usize]) -> Priority {
        Priority(
            self.0
                .iter()
                .filter_map(|m| subset.iter().position(|s| s == m))
                .collect(),
        )
    }
}

fn tally(votes: &[LabelClass]) -> [usize; K] {
    let mut counts = [0usize; K];
    for v in votes {
        counts[v.index()] += 1;
    }
    counts
}

/// Mode of the votes; ties go to the highest-priority model that voted for a tied label.
///
/// # Panics
/// If `votes` is empty or its length differs from `priority`.
pub fn hard_vote(votes: &[LabelClass], priority: &Priority) -> LabelClass {
    assert!(!votes.is_empty(), "hard_vote needs at least one vote");
    assert_eq!(votes.len(), priority.len(), "one priority slot per vote");
    let counts = tally(votes);
    let max = *counts.iter().max().expect("three classes");
    let mut tied = counts.iter().enumerate().filter(|&(_, &c)| c == max).map(|(i, _)| i);
    let first = tied.next().expect("a maximum exists");
    if tied.next().is_none() {
        return LabelClass::ALL[first];
    }
    priority
        .order()
        .iter()
        .map(|&m| votes[m])
        .find(|v| counts[v.index()] == max)
        .expect("some model voted for a tied label")
}

fn check_weights(weights: &[f64]) -> Result<f64> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Argument(format!("weights must be finite and non-negative, got {w}")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Argument("at least one weight must be positive".into()));
    }
    Ok(total)
}

/// Winning label and its normalized score (weights rescaled to sum to 1).
pub fn weighted_vote_scored(
    votes: &[LabelClass],
    weights: &[f64],
    priority: &Priority,
) -> Result<(LabelClass, f64)> {
    if votes.is_empty() || votes.len() != weights.len() || votes.len() != priority.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} votes, weights and priority slots", votes.len()),
            actual: format!("{} weights, {} priority slots", weights.len(), priority.len()),
        });
    }
    let total = check_weights(weights)?;
    let mut scores = [0.0f64; K];
    for (v, w) in votes.iter().zip(weights) {
        scores[v.index()] += w / total;
    }
    let max = scores.iter().copied().fold(0.0, f64::max);
    let tied: Vec<bool> = scores
        .iter()
        .map(|&s| s > 0.0 && max - s <= SCORE_TIE_TOLERANCE)
        .collect();
    let label = if tied.iter().filter(|&&t| t).count() == 1 {
        LabelClass::ALL[tied.iter().position(|&t| t).expect("one tied label")]
    } else {
        priority
            .order()
            .iter()
            .find(|&&m| weights[m] > 0.0 && tied[votes[m].index()])
            .map(|&m| votes[m])
            .expect("a positive-weight model voted for each tied label")
    };
    Ok((label, scores[label.index()]))
}

/// Label with the greatest total weight; near-ties resolved as in [`hard_vote`].
pub fn weighted_vote(votes: &[LabelClass], weights: &[f64], priority: &Priority) -> Result<LabelClass> {
    weighted_vote_scored(votes, weights, priority).map(|(label, _)| label)
}

/// Non-negative per-model weights keyed by model id, in model order.
///
/// Serialized as a JSON object `{"model_id": weight, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IndexMap<String, f64>", into = "IndexMap<String, f64>")]
pub struct WeightVector {
    weights: IndexMap<String, f64>,
}

impl WeightVector {
    pub fn new(pairs: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut weights = IndexMap::new();
        for (id, w) in pairs {
            if weights.insert(id.clone(), w).is_some() {
                return Err(Error::Argument(format!("duplicate weight for model `{id}`")));
            }
        }
        if weights.is_empty() {
            return Err(Error::Argument("weight vector is empty".into()));
        }
        check_weights(&weights.values().copied().collect::<Vec<_>>())?;
        Ok(Self { weights })
    }

    pub fn uniform(model_ids: &[String]) -> Result<Self> {
        let w = 1.0 / model_ids.len() as f64;
        Self::new(model_ids.iter().map(|id| (id.clone(), w)))
    }

    pub fn get(&self, model_id: &str) -> Option<f64> {
        self.weights.get(model_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Same vector rescaled to sum to 1.
    pub fn normalized(&self) -> Self {
        let total: f64 = self.weights.values().sum();
        Self {
            weights: self
                .weights
                .iter()
                .map(|(k, v)| (k.clone(), v / total))
                .collect(),
        }
    }

    /// Weights in `model_ids` order; the vector must cover exactly these models.
    pub fn aligned(&self, model_ids: &[String]) -> Result<Vec<f64>> {
        let out = model_ids
            .iter()
            .map(|id| {
                self.get(id)
                    .ok_or_else(|| Error::Argument(format!("no weight for model `{id}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if self.weights.len() != model_ids.len() {
            let extra: Vec<&str> = self
                .weights
                .keys()
                .filter(|k| !model_ids.contains(k))
                .map(String::as_str)
                .collect();
            return Err(Error::Argument(format!(
                "weights given for models outside the ensemble: {}",
                extra.join(", ")
            )));
        }
        Ok(out)
    }
}

impl TryFrom<IndexMap<String, f64>> for WeightVector {
    type Error = Error;

    fn try_from(map: IndexMap<String, f64>) -> Result<Self> {
        WeightVector::new(map)
    }
}

impl From<WeightVector> for IndexMap<String, f64> {
    fn from(w: WeightVector) -> Self {
        w.weights
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteMode {
    #[default]
    Hard,
    Weighted,
}

impl std::str::FromStr for VoteMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(VoteMode::Hard),
            "weighted" => Ok(VoteMode::Weighted),
            other => Err(Error::Argument(format!("unknown vote mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for VoteMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VoteMode::Hard => "hard",
            VoteMode::Weighted => "weighted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Tie-breaking order of model ids; `None` means matrix order.
    pub priority_order: Option<Vec<String>>,
    pub mode: VoteMode,
}

impl EnsembleConfig {
    pub fn priority(&self, matrix: &PredictionMatrix) -> Result<Priority> {
        match &self.priority_order {
            Some(order) => Priority::from_order(order, matrix.model_ids()),
            None => Ok(Priority::identity(matrix.n_models())),
        }
    }
}

/// How one example was decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteBreakdown {
    pub example_id: String,
    pub votes: Vec<LabelClass>,
    pub label: LabelClass,
    /// Vote count (hard) or normalized weight total (weighted) of the winner.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    pub labels: Vec<LabelClass>,
    pub breakdown: Vec<VoteBreakdown>,
}

pub fn ensemble_predict(
    matrix: &PredictionMatrix,
    config: &EnsembleConfig,
    weights: Option<&WeightVector>,
) -> Result<EnsembleOutput> {
    if matrix.n_models() == 0 {
        return Err(Error::Argument("ensemble needs at least one model".into()));
    }
    let priority = config.priority(matrix)?;
    let weights = match (config.mode, weights) {
        (VoteMode::Hard, None) => None,
        (VoteMode::Weighted, Some(w)) => Some(w.aligned(matrix.model_ids())?),
        (VoteMode::Hard, Some(_)) => {
            return Err(Error::Argument("hard voting takes no weights".into()))
        }
        (VoteMode::Weighted, None) => {
            return Err(Error::Argument("weighted voting requires a weight vector".into()))
        }
    };
    let mut labels = Vec::with_capacity(matrix.n_examples());
    let mut breakdown = Vec::with_capacity(matrix.n_examples());
    for (e, example_id) in matrix.example_ids().iter().enumerate() {
        let votes = matrix.column(e);
        let (label, score) = match &weights {
            None => {
                let label = hard_vote(&votes, &priority);
                (label, tally(&votes)[label.index()] as f64)
            }
            Some(w) => weighted_vote_scored(&votes, w, &priority)?,
        };
        labels.push(label);
        breakdown.push(VoteBreakdown {
            example_id: example_id.clone(),
            votes,
            label,
            score,
        });
    }
    Ok(EnsembleOutput { labels, breakdown })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSearchResult {
    pub best_weights: WeightVector,
    pub best_dev_macro_f1: f64,
    pub uniform_dev_macro_f1: f64,
    pub grid_step: f64,
    pub grid_denominator: u32,
    pub evaluations: u64,
    /// False when `grid_denominator` is not a multiple of the model count, in
    /// which case the uniform point was evaluated in addition to the grid.
    pub uniform_on_grid: bool,
}

/// Number of compositions of `q` into `m` non-negative parts, `C(q + m - 1, m - 1)`.
pub fn simplex_grid_size(m: usize, q: u32) -> Option<u64> {
    if m == 0 {
        return Some(0);
    }
    let n = q as u64 + m as u64 - 1;
    let k = (m as u64 - 1).min(q as u64);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// All compositions of `q` into `m` parts, lexicographically ascending.
pub fn simplex_grid(m: usize, q: u32) -> Vec<Vec<u32>> {
    fn rec(m: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == m {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(m, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if m > 0 {
        rec(m, q, &mut Vec::with_capacity(m), &mut out);
    }
    out
}

/// A weight candidate as integer numerators over a shared denominator.
struct Candidate {
    numerators: Vec<u64>,
    /// Squared distance to uniform, scaled by the denominator squared.
    distance: u64,
}

struct Scored<'a> {
    candidate: &'a Candidate,
    f1: f64,
}

/// Higher F1, then closer to uniform, then lexicographically smaller weights.
fn better(a: &Scored, b: &Scored) -> Ordering {
    b.f1.total_cmp(&a.f1)
        .then(a.candidate.distance.cmp(&b.candidate.distance))
        .then(a.candidate.numerators.cmp(&b.candidate.numerators))
}

fn score_candidate(columns: &[Vec<LabelClass>], gold: &[LabelClass], weights: &[f64], priority: &Priority) -> Result<f64> {
    let pred = columns
        .iter()
        .map(|votes| weighted_vote(votes, weights, priority))
        .collect::<Result<Vec<_>>>()?;
    metrics::macro_f1(&pred, gold)
}

fn select_best<'a>(
    candidates: &'a [Candidate],
    denominator: u64,
    columns: &[Vec<LabelClass>],
    gold: &[LabelClass],
    priority: &Priority,
    parallel: bool,
) -> Result<Scored<'a>> {
    let eval = |c: &'a Candidate| -> Result<Scored<'a>> {
        let w: Vec<f64> = c.numerators.iter().map(|&n| n as f64 / denominator as f64).collect();
        Ok(Scored {
            candidate: c,
            f1: score_candidate(columns, gold, &w, priority)?,
        })
    };
    let pick = |a: Result<Scored<'a>>, b: Result<Scored<'a>>| match (a, b) {
        (Ok(a), Ok(b)) => Ok(if better(&a, &b) == Ordering::Greater { b } else { a }),
        (Err(e), _) | (_, Err(e)) => Err(e),
    };
    let best = if parallel {
        candidates.par_iter().map(eval).reduce_with(pick)
    } else {
        candidates.iter().map(eval).reduce(pick)
    };
    best.expect("at least one candidate")
}

/// Exhaustive dev-set search over weights that are multiples of `1/grid_denominator`.
///
/// Every composition of `grid_denominator` into `M` parts is scored by dev
/// macro F1 under [`weighted_vote`]. The uniform vector is always scored, so
/// the winner never does worse than hard voting. F1 ties prefer the point
/// closest to uniform, then the lexicographically smallest weight tuple; the
/// result does not depend on evaluation order.
pub fn search_weights(
    matrix: &PredictionMatrix,
    gold: &[LabelClass],
    grid_denominator: u32,
    priority: &Priority,
) -> Result<WeightSearchResult> {
    search_weights_impl(matrix, gold, grid_denominator, priority, true, false)
}

fn search_weights_impl(
    matrix: &PredictionMatrix,
    gold: &[LabelClass],
    grid_denominator: u32,
    priority: &Priority,
    parallel: bool,
    reversed: bool,
) -> Result<WeightSearchResult> {
    let m = matrix.n_models();
    if m == 0 {
        return Err(Error::Argument("weight search needs at least one model".into()));
    }
    if grid_denominator == 0 {
        return Err(Error::Argument("grid step must be 1/q with q >= 1".into()));
    }
    if gold.len() != matrix.n_examples() || gold.is_empty() {
        return Err(Error::Argument(format!(
            "dev gold has {} labels for {} examples",
            gold.len(),
            matrix.n_examples()
        )));
    }
    if priority.len() != m {
        return Err(Error::Argument("priority does not match the model count".into()));
    }
    let q = grid_denominator;
    let size = simplex_grid_size(m, q).filter(|&s| s <= MAX_GRID_POINTS).ok_or_else(|| {
        Error::Argument(format!(
            "simplex grid for {m} models at step 1/{q} exceeds {MAX_GRID_POINTS} points"
        ))
    })?;

    // Common denominator q*M puts grid points and the uniform point on integers.
    let denominator = q as u64 * m as u64;
    let uniform_num = q as u64;
    let make = |numerators: Vec<u64>| {
        let distance = numerators
            .iter()
            .map(|&n| n.abs_diff(uniform_num).pow(2))
            .sum();
        Candidate { numerators, distance }
    };
    let mut candidates: Vec<Candidate> = simplex_grid(m, q)
        .into_iter()
        .map(|c| make(c.into_iter().map(|k| k as u64 * m as u64).collect()))
        .collect();
    debug_assert_eq!(candidates.len() as u64, size);
    let uniform_on_grid = q as usize % m == 0;
    if !uniform_on_grid {
        candidates.push(make(vec![uniform_num; m]));
    }
    if reversed {
        candidates.reverse();
    }

    let columns: Vec<Vec<LabelClass>> = (0..matrix.n_examples()).map(|e| matrix.column(e)).collect();
    let best = select_best(&candidates, denominator, &columns, gold, priority, parallel)?;
    let uniform = vec![1.0 / m as f64; m];
    let uniform_dev_macro_f1 = score_candidate(&columns, gold, &uniform, priority)?;
    let best_weights = WeightVector::new(
        matrix
            .model_ids()
            .iter()
            .cloned()
            .zip(best.candidate.numerators.iter().map(|&n| n as f64 / denominator as f64)),
    )?;
    Ok(WeightSearchResult {
        best_weights,
        best_dev_macro_f1: best.f1,
        uniform_dev_macro_f1,
        grid_step: 1.0 / q as f64,
        grid_denominator: q,
        evaluations: candidates.len() as u64,
        uniform_on_grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRow {
    /// Member model ids in model order.
    pub models: Vec<String>,
    pub size: usize,
    pub macro_f1: f64,
}

/// Hard-vote macro F1 of every non-empty subset of models.
///
/// Each subset keeps the full ensemble's priority order restricted to its
/// members. Rows are sorted by F1 descending, then size ascending, then by
/// member indices.
pub fn subset_ensembles(matrix: &PredictionMatrix, gold: &[LabelClass], priority: &Priority) -> Result<Vec<SubsetRow>> {
    let m = matrix.n_models();
    if m == 0 || m > MAX_SUBSET_MODELS {
        return Err(Error::Argument(format!(
            "subset exploration supports 1..={MAX_SUBSET_MODELS} models, got {m}"
        )));
    }
    if gold.len() != matrix.n_examples() {
        return Err(Error::Argument(format!(
            "gold has {} labels for {} examples",
            gold.len(),
            matrix.n_examples()
        )));
    }
    if priority.len() != m {
        return Err(Error::Argument("priority does not match the model count".into()));
    }
    let columns: Vec<Vec<LabelClass>> = (0..matrix.n_examples()).map(|e| matrix.column(e)).collect();
    let mut rows: Vec<(Vec<usize>, f64)> = (1u32..(1 << m))
        .into_par_iter()
        .map(|mask| {
            let members: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
            let sub_priority = priority.restrict(&members);
            let mut votes = Vec::with_capacity(members.len());
            let pred: Vec<LabelClass> = columns
                .iter()
                .map(|col| {
                    votes.clear();
                    votes.extend(members.iter().map(|&i| col[i]));
                    hard_vote(&votes, &sub_priority)
                })
                .collect();
            metrics::macro_f1(&pred, gold).map(|f1| (members, f1))
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(a.0.len().cmp(&b.0.len()))
            .then(a.0.cmp(&b.0))
    });
    Ok(rows
        .into_iter()
        .map(|(members, macro_f1)| SubsetRow {
            size: members.len(),
            models: members.iter().map(|&i| matrix.model_ids()[i].clone()).collect(),
            macro_f1,
        })
        .collect())
}

/// CSV with header `rank,size,macro_f1,models`; members joined by `+`.
pub fn subsets_to_csv(rows: &[SubsetRow]) -> String {
    let mut out = String::from("rank,size,macro_f1,models\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", i + 1, r.size, r.macro_f1, r.models.join("+"));
    }
    out
}

pub fn subsets_to_text(rows: &[SubsetRow]) -> String {
    let names: Vec<String> = rows.iter().map(|r| r.models.join(" + ")).collect();
    let width = names.iter().map(|n| n.chars().count()).chain(["models".len()]).max().unwrap_or(0);
    let mut out = format!("{:>4}  {:>4}  {:>8}  models\n", "rank", "size", "macro F1");
    let _ = writeln!(out, "{}  {}  {}  {}", "-".repeat(4), "-".repeat(4), "-".repeat(8), "-".repeat(width));
    for (i, (r, name)) in rows.iter().zip(&names).enumerate() {
        let _ = writeln!(out, "{:>4}  {:>4}  {:>8.4}  {name}", i + 1, r.size, r.macro_f1);
    }
    out
}

/// Fraction of examples on which each pair of models agrees.
pub fn agreement_matrix(matrix: &PredictionMatrix) -> Vec<Vec<f64>> {
    let m = matrix.n_models();
    let n = matrix.n_examples();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let same = matrix.row(i).iter().zip(matrix.row(j)).filter(|(a, b)| a == b).count();
                    if n == 0 { 1.0 } else { same as f64 / n as f64 }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn l(codes: &[u8]) -> Vec<LabelClass> {
        codes.iter().map(|&c| LabelClass::try_from(c).unwrap()).collect()
    }

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn matrix(rows: &[&[u8]]) -> PredictionMatrix {
        PredictionMatrix::from_rows(
            ids("m", rows.len()),
            ids("e", rows[0].len()),
            rows.iter().map(|r| l(r)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn hard_vote_examples() {
        let p = Priority::identity(5);
        assert_eq!(hard_vote(&l(&[0, 0, 0, 0, 0]), &p), LabelClass::NonViolence);
        assert_eq!(hard_vote(&l(&[2, 2, 1, 0, 2]), &p), LabelClass::DirectViolence);
        assert_eq!(hard_vote(&l(&[0, 0, 1, 1, 2]), &p), LabelClass::NonViolence);
        // same tie, but the third model now has top priority
        let p = Priority(vec![2, 0, 1, 3, 4]);
        assert_eq!(hard_vote(&l(&[0, 0, 1, 1, 2]), &p), LabelClass::PassiveViolence);
        // the top-priority model voted for the non-tied label: next model decides
        let p = Priority(vec![4, 3, 0, 1, 2]);
        assert_eq!(hard_vote(&l(&[0, 0, 1, 1, 2]), &p), LabelClass::PassiveViolence);
    }

    #[test]
    fn priority_from_order() {
        let models = ids("m", 3);
        let p = Priority::from_order(&["m2".into(), "m0".into(), "m1".into()], &models).unwrap();
        assert_eq!(p.order(), [2, 0, 1]);
        assert!(Priority::from_order(&["m2".into(), "m0".into()], &models).is_err());
        assert!(Priority::from_order(&["m2".into(), "m2".into(), "m1".into()], &models).is_err());
        assert!(Priority::from_order(&["x".into(), "m0".into(), "m1".into()], &models).is_err());
        assert_eq!(p.restrict(&[0, 2]).order(), [1, 0]);
    }

    #[test]
    fn weighted_vote_examples() {
        let p = Priority::identity(5);
        let uniform = [0.2; 5];
        assert_eq!(weighted_vote(&l(&[2, 2, 1, 0, 2]), &uniform, &p).unwrap(), LabelClass::DirectViolence);
        let w = [0.4, 0.2, 0.2, 0.1, 0.1];
        assert_eq!(weighted_vote(&l(&[0, 1, 1, 1, 1]), &w, &p).unwrap(), LabelClass::PassiveViolence);
        // 0.4 vs 0.4 tie: model 0 arbitrates
        assert_eq!(weighted_vote(&l(&[0, 1, 1, 2, 2]), &[0.4, 0.2, 0.2, 0.1, 0.1], &p).unwrap(), LabelClass::NonViolence);
        assert!(matches!(weighted_vote(&l(&[0, 1]), &[0.0, 0.0], &Priority::identity(2)), Err(Error::Argument(_))));
        assert!(weighted_vote(&l(&[0, 1]), &[1.0, -0.5], &Priority::identity(2)).is_err());
        assert!(weighted_vote(&l(&[0, 1]), &[1.0], &Priority::identity(2)).is_err());
    }

    #[test]
    fn zero_weight_models_do_not_arbitrate() {
        // model 0 has top priority but weight 0; labels 1 and 2 tie at 0.5
        let votes = l(&[1, 2, 1]);
        let w = [0.0, 0.5, 0.5];
        assert_eq!(weighted_vote(&votes, &w, &Priority::identity(3)).unwrap(), LabelClass::DirectViolence);
    }

    #[test]
    fn weight_vector_contract() {
        let w = WeightVector::new([("a".to_string(), 2.0), ("b".to_string(), 6.0)]).unwrap();
        let n = w.normalized();
        assert_eq!(n.get("a"), Some(0.25));
        assert!((n.iter().map(|(_, v)| v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w.aligned(&["b".into(), "a".into()]).unwrap(), [6.0, 2.0]);
        assert!(w.aligned(&["a".into()]).is_err());
        assert!(w.aligned(&["a".into(), "b".into(), "c".into()]).is_err());
        assert!(WeightVector::new([("a".to_string(), 0.0)]).is_err());
        assert!(WeightVector::new(Vec::<(String, f64)>::new()).is_err());
        let json = serde_json::to_string(&n).unwrap();
        assert_eq!(json, r#"{"a":0.25,"b":0.75}"#);
        assert_eq!(serde_json::from_str::<WeightVector>(&json).unwrap(), n);
        assert!(serde_json::from_str::<WeightVector>(r#"{"a":-1.0}"#).is_err());
    }

    #[test]
    fn ensemble_identity_and_agreement() {
        let one = matrix(&[&[0, 1, 2, 2, 1]]);
        let out = ensemble_predict(&one, &EnsembleConfig::default(), None).unwrap();
        assert_eq!(out.labels, one.row(0));
        let same = matrix(&[&[2, 1, 0], &[2, 1, 0], &[2, 1, 0]]);
        let out = ensemble_predict(&same, &EnsembleConfig::default(), None).unwrap();
        assert_eq!(out.labels, same.row(1));
        assert!(out.breakdown.iter().all(|b| b.score == 3.0));
    }

    #[test]
    fn ensemble_mode_weight_pairing() {
        let m = matrix(&[&[0, 1], &[1, 1]]);
        let w = WeightVector::uniform(m.model_ids()).unwrap();
        assert!(ensemble_predict(&m, &EnsembleConfig::default(), Some(&w)).is_err());
        let weighted = EnsembleConfig {
            mode: VoteMode::Weighted,
            ..EnsembleConfig::default()
        };
        assert!(ensemble_predict(&m, &weighted, None).is_err());
        let out = ensemble_predict(&m, &weighted, Some(&w)).unwrap();
        assert_eq!(out.labels, l(&[0, 1]));
        assert_eq!(out.breakdown[0].score, 0.5);
    }

    #[test]
    fn hand_enumerated_three_model_fixture() {
        // columns are examples; priority m0 > m1 > m2
        let m = matrix(&[
            &[0, 0, 1, 2, 0, 1, 2, 2, 0, 1],
            &[0, 1, 1, 2, 2, 0, 1, 0, 0, 2],
            &[1, 1, 1, 0, 1, 2, 0, 1, 2, 0],
        ]);
        let out = ensemble_predict(&m, &EnsembleConfig::default(), None).unwrap();
        // e0 0,0,1->0  e1 0,1,1->1  e2 unanimous 1  e3 2,2,0->2  e4 0,2,1 three-way->m0=0
        // e5 1,0,2->1  e6 2,1,0->2  e7 2,0,1->2  e8 0,0,2->0  e9 1,2,0->1
        assert_eq!(out.labels, l(&[0, 1, 1, 2, 0, 1, 2, 2, 0, 1]));
        let rev = EnsembleConfig {
            priority_order: Some(vec!["m2".into(), "m1".into(), "m0".into()]),
            mode: VoteMode::Hard,
        };
        let out = ensemble_predict(&m, &rev, None).unwrap();
        assert_eq!(out.labels, l(&[0, 1, 1, 2, 1, 2, 0, 1, 0, 0]));
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(simplex_grid_size(2, 2), Some(3));
        assert_eq!(simplex_grid_size(5, 20), Some(10_626));
        assert_eq!(simplex_grid_size(1, 20), Some(1));
        assert_eq!(simplex_grid(2, 2), vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        for (m, q) in [(3, 4), (4, 5), (5, 20)] {
            let grid = simplex_grid(m, q);
            assert_eq!(grid.len() as u64, simplex_grid_size(m, q).unwrap());
            assert!(grid.iter().all(|c| c.len() == m && c.iter().sum::<u32>() == q));
            assert!(grid.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn search_single_model() {
        let m = matrix(&[&[0, 1, 2, 1]]);
        let gold = l(&[0, 1, 1, 1]);
        let r = search_weights(&m, &gold, 20, &Priority::identity(1)).unwrap();
        assert_eq!(r.best_weights.get("m0"), Some(1.0));
        assert_eq!(r.best_dev_macro_f1, metrics::macro_f1(m.row(0), &gold).unwrap());
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn search_two_models_step_half() {
        let m = matrix(&[&[0, 1, 2, 2], &[0, 1, 1, 2]]);
        let gold = l(&[0, 1, 1, 2]);
        let r = search_weights(&m, &gold, 2, &Priority::identity(2)).unwrap();
        assert_eq!(r.evaluations, 3);
        assert!(r.uniform_on_grid);
        // the uniform point ties on e2 and m0 arbitrates wrongly, so only (0, 1) is perfect
        assert_eq!(r.best_dev_macro_f1, 1.0);
        assert_eq!(r.best_weights.get("m1"), Some(1.0));
    }

    #[test]
    fn search_adds_uniform_off_grid() {
        let m = matrix(&[&[0, 1, 2], &[0, 1, 1], &[2, 2, 2]]);
        let gold = l(&[0, 1, 2]);
        let r = search_weights(&m, &gold, 4, &Priority::identity(3)).unwrap();
        assert!(!r.uniform_on_grid);
        assert_eq!(r.evaluations, simplex_grid_size(3, 4).unwrap() + 1);
        assert!(r.best_dev_macro_f1 >= r.uniform_dev_macro_f1);
    }

    #[test]
    fn search_prefers_uniform_on_ties() {
        // every model perfect: all weight vectors score 1.0, uniform must win
        let m = matrix(&[&[0, 1, 2], &[0, 1, 2], &[0, 1, 2]]);
        let r = search_weights(&m, &l(&[0, 1, 2]), 6, &Priority::identity(3)).unwrap();
        for (_, w) in r.best_weights.iter() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn search_is_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let gold: Vec<LabelClass> = (0..40).map(|_| LabelClass::ALL[rng.random_range(0..3)]).collect();
            let rows: Vec<Vec<LabelClass>> = (0..4)
                .map(|_| {
                    gold.iter()
                        .map(|&g| if rng.random_bool(0.6) { g } else { LabelClass::ALL[rng.random_range(0..3)] })
                        .collect()
                })
                .collect();
            let m = PredictionMatrix::from_rows(ids("m", 4), ids("e", 40), rows).unwrap();
            let p = Priority::identity(4);
            let a = search_weights_impl(&m, &gold, 10, &p, true, false).unwrap();
            let b = search_weights_impl(&m, &gold, 10, &p, false, false).unwrap();
            let c = search_weights_impl(&m, &gold, 10, &p, false, true).unwrap();
            let d = search_weights_impl(&m, &gold, 10, &p, true, true).unwrap();
            assert_eq!(a, b);
            assert_eq!(a, c);
            assert_eq!(a, d);
        }
    }

    #[test]
    fn search_argument_errors() {
        let m = matrix(&[&[0, 1]]);
        let p = Priority::identity(1);
        assert!(search_weights(&m, &l(&[0]), 20, &p).is_err());
        assert!(search_weights(&m, &l(&[0, 1]), 0, &p).is_err());
        let wide = PredictionMatrix::from_rows(ids("m", 12), ids("e", 1), vec![l(&[0]); 12]).unwrap();
        assert!(search_weights(&wide, &l(&[0]), 100, &Priority::identity(12)).is_err());
    }

    #[test]
    fn subsets_rows_and_order() {
        let m = matrix(&[&[0, 1, 2, 2], &[0, 1, 1, 2], &[1, 1, 2, 0]]);
        let gold = l(&[0, 1, 2, 2]);
        let rows = subset_ensembles(&m, &gold, &Priority::identity(3)).unwrap();
        assert_eq!(rows.len(), 7);
        assert_eq!(rows[0].models, ["m0"]);
        assert_eq!(rows[0].macro_f1, 1.0);
        assert!(rows.windows(2).all(|w| w[0].macro_f1 > w[1].macro_f1
            || (w[0].macro_f1 == w[1].macro_f1 && w[0].size <= w[1].size)));
        for (i, id) in m.model_ids().iter().enumerate() {
            let row = rows.iter().find(|r| r.models == [id.clone()]).unwrap();
            assert_eq!(row.macro_f1, metrics::macro_f1(m.row(i), &gold).unwrap());
        }
        let csv = subsets_to_csv(&rows);
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.starts_with("rank,size,macro_f1,models\n1,1,1,m0\n"), "{csv}");
        assert_eq!(subsets_to_text(&rows).lines().count(), 9);
    }

    #[test]
    fn subsets_limits() {
        let m = matrix(&[&[0]]);
        assert_eq!(subset_ensembles(&m, &l(&[0]), &Priority::identity(1)).unwrap().len(), 1);
        let big = PredictionMatrix::from_rows(ids("m", 21), ids("e", 1), vec![l(&[0]); 21]).unwrap();
        assert!(subset_ensembles(&big, &l(&[0]), &Priority::identity(21)).is_err());
    }

    #[test]
    fn agreement() {
        let m = matrix(&[&[0, 1, 2], &[0, 1, 2]]);
        assert_eq!(agreement_matrix(&m), vec![vec![1.0; 2]; 2]);
        let m = matrix(&[&[0, 1, 2], &[1, 2, 0]]);
        assert_eq!(agreement_matrix(&m), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let m = matrix(&[&[0, 1, 2, 0], &[0, 2, 2, 1], &[1, 1, 2, 0]]);
        let a = agreement_matrix(&m);
        assert_eq!(a[0][1], 0.5);
        assert_eq!(a[0][2], 0.75);
        assert_eq!(a[1][2], 0.25);
        assert_eq!(a[2][1], 0.25);
    }
}
