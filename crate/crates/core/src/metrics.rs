//! Confusion matrix, per-class precision/recall/F1 and macro F1.
//!
//! Precision, recall and F1 are 0 whenever their denominator is 0, and the
//! macro average always runs over all three classes, whether or not a class
//! occurs in the data.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LabelClass;
use crate::error::{Error, Result};

const K: usize = LabelClass::COUNT;

/// Rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn from_labels(pred: &[LabelClass], gold: &[LabelClass]) -> Self {
        let mut counts = [[0u64; K]; K];
        for (p, g) in pred.iter().zip(gold) {
            counts[g.index()][p.index()] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|i| self.counts[i][i]).sum()
    }

    pub fn true_positives(&self, class: LabelClass) -> u64 {
        self.counts[class.index()][class.index()]
    }

    pub fn false_positives(&self, class: LabelClass) -> u64 {
        let c = class.index();
        (0..K).filter(|&g| g != c).map(|g| self.counts[g][c]).sum()
    }

    pub fn false_negatives(&self, class: LabelClass) -> u64 {
        let c = class.index();
        (0..K).filter(|&p| p != c).map(|p| self.counts[c][p]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: BTreeMap<LabelClass, ClassScores>,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_aligned(pred: &[LabelClass], gold: &[LabelClass]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::Argument(format!(
            "prediction length {} does not match gold length {}",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Argument("cannot evaluate zero examples".into()));
    }
    Ok(())
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let mut per_class = BTreeMap::new();
        for class in LabelClass::ALL {
            let tp = confusion.true_positives(class);
            let precision = ratio(tp, tp + confusion.false_positives(class));
            let recall = ratio(tp, tp + confusion.false_negatives(class));
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            let support = confusion.counts[class.index()].iter().sum();
            per_class.insert(
                class,
                ClassScores {
                    precision,
                    recall,
                    f1,
                    support,
                },
            );
        }
        let macro_f1 = per_class.values().map(|s| s.f1).sum::<f64>() / K as f64;
        let n = confusion.total();
        Self {
            n: n as usize,
            accuracy: ratio(confusion.trace(), n),
            macro_f1,
            per_class,
            confusion,
        }
    }

    /// Confusion matrix and per-class table as aligned text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n = {}  accuracy = {:.4}  macro F1 = {:.4}", self.n, self.accuracy, self.macro_f1);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<18} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support");
        for (class, s) in &self.per_class {
            let _ = writeln!(
                out,
                "{:<18} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                format!("{} {}", class, class.name()),
                s.precision,
                s.recall,
                s.f1,
                s.support
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "confusion (rows = gold, columns = predicted)");
        let _ = writeln!(out, "{:>6} {:>8} {:>8} {:>8}", "", "0", "1", "2");
        for (g, row) in self.confusion.counts.iter().enumerate() {
            let _ = writeln!(out, "{:>6} {:>8} {:>8} {:>8}", g, row[0], row[1], row[2]);
        }
        out
    }
}

pub fn evaluate(pred: &[LabelClass], gold: &[LabelClass]) -> Result<EvalReport> {
    check_aligned(pred, gold)?;
    Ok(EvalReport::from_confusion(ConfusionMatrix::from_labels(pred, gold)))
}

/// Macro F1 only.
pub fn macro_f1(pred: &[LabelClass], gold: &[LabelClass]) -> Result<f64> {
    evaluate(pred, gold).map(|r| r.macro_f1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub resamples: usize,
}

/// 95% percentile bootstrap interval for macro F1, resampling examples with replacement.
///
/// Quantiles use linear interpolation between order statistics.
pub fn bootstrap_ci(
    pred: &[LabelClass],
    gold: &[LabelClass],
    resamples: usize,
    seed: u64,
) -> Result<ConfidenceInterval> {
    check_aligned(pred, gold)?;
    if resamples == 0 {
        return Err(Error::Argument("bootstrap needs at least one resample".into()));
    }
    let n = pred.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut counts = [[0u64; K]; K];
        for _ in 0..n {
            let i = rng.random_range(0..n);
            counts[gold[i].index()][pred[i].index()] += 1;
        }
        scores.push(EvalReport::from_confusion(ConfusionMatrix { counts }).macro_f1);
    }
    scores.sort_by(f64::total_cmp);
    Ok(ConfidenceInterval {
        low: quantile(&scores, 0.025),
        high: quantile(&scores, 0.975),
        level: 0.95,
        resamples,
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// One row of a score table: model, approach, macro F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    pub approach: String,
    pub macro_f1: f64,
}

/// Aligned text table of model scores; `summary` rows are set off by a rule.
pub fn render_score_table(rows: &[ScoreRow], summary: &[ScoreRow]) -> String {
    let header = ("Model", "Approach", "Macro F1");
    let w_model = rows
        .iter()
        .chain(summary)
        .map(|r| r.model.chars().count())
        .chain([header.0.len()])
        .max()
        .unwrap_or(0);
    let w_approach = rows
        .iter()
        .chain(summary)
        .map(|r| r.approach.chars().count())
        .chain([header.1.len()])
        .max()
        .unwrap_or(0);
    let rule = format!("{}  {}  {}\n", "-".repeat(w_model), "-".repeat(w_approach), "-".repeat(8));
    let line = |m: &str, a: &str, f: &str| format!("{m:<w_model$}  {a:<w_approach$}  {f:>8}\n");
    let mut out = line(header.0, header.1, header.2);
    out.push_str(&rule);
    for r in rows {
        out.push_str(&line(&r.model, &r.approach, &format!("{:.3}", r.macro_f1)));
    }
    if !summary.is_empty() {
        out.push_str(&rule);
        for r in summary {
            out.push_str(&line(&r.model, &r.approach, &format!("{:.3}", r.macro_f1)));
        }
    }
    out
}
