//! The pipeline commands. Each one reads and checks everything it needs
//! before it writes its first output file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context as _};
use serde::Serialize;
use vitd_core::corpus::{compute_stats, load_split};
use vitd_core::ensemble::{ensemble_predict, search_weights, subset_ensembles, subsets_to_csv, subsets_to_text};
use vitd_core::linear::{predict_split, read_model, train, write_model};
use vitd_core::metrics::{bootstrap_ci, evaluate, render_score_table, ConfidenceInterval, ScoreRow};
use vitd_core::prediction_store::{assemble_matrix, import_predictions, read_predictions, write_predictions};
use vitd_core::{
    DatasetSplit, EnsembleConfig, EvalReport, LabelClass, PredictionMatrix, PredictionRecord, SplitStats, TrainedModel,
    VoteMode, WeightVector,
};

use crate::config::{ExperimentConfig, SplitName};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;

pub struct Context<'a> {
    pub config: ExperimentConfig,
    pub run: Run,
    pub out: &'a mut dyn Write,
}

fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn say(ctx: &mut Context<'_>, text: &str) -> anyhow::Result<()> {
    ctx.out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        ctx.out.write_all(b"\n")?;
    }
    Ok(())
}

fn load(ctx: &mut Context<'_>, split: SplitName) -> CliResult<DatasetSplit> {
    let path = ctx.config.split_path(split)?.to_path_buf();
    ctx.run.input(&path)?;
    let data = load_split(split.as_str(), &path, ctx.config.data.format, &ctx.config.data.schema)
        .with_context(|| format!("loading {split} split from {}", path.display()))?;
    Ok(data)
}

fn ensemble_config(config: &ExperimentConfig, mode: VoteMode) -> EnsembleConfig {
    EnsembleConfig { priority_order: config.ensemble.priority.clone(), mode }
}

/// Reads one model's stored predictions for a split and checks they belong to it.
fn stored_predictions(ctx: &mut Context<'_>, id: &str, split: SplitName, data: &DatasetSplit) -> CliResult<Vec<PredictionRecord>> {
    let path = ctx.config.predictions_path(id, split);
    if !path.is_file() {
        return Err(CliError::Runtime(anyhow!(
            "no {split} predictions for model `{id}` at {} (run `predict` or `import` first)",
            path.display()
        )));
    }
    ctx.run.input(&path)?;
    let records = import_predictions(&path, data).with_context(|| format!("reading {}", path.display()))?;
    if let Some(r) = records.iter().find(|r| r.model_id != id) {
        return Err(CliError::Runtime(anyhow!(
            "{} holds predictions for model `{}`, expected `{id}`",
            path.display(),
            r.model_id
        )));
    }
    Ok(records)
}

fn load_matrix(ctx: &mut Context<'_>, split: SplitName) -> CliResult<(DatasetSplit, PredictionMatrix)> {
    if ctx.config.members.is_empty() {
        return Err(CliError::usage("the config defines no ensemble members"));
    }
    let data = load(ctx, split)?;
    let members = ctx.config.members.clone();
    let mut records = Vec::new();
    for id in &members {
        records.extend(stored_predictions(ctx, id, split, &data)?);
    }
    let matrix = assemble_matrix(&records, &members, &data)?;
    Ok((data, matrix))
}

fn pick<'c, T>(items: &'c [T], id_of: impl Fn(&T) -> &str, wanted: Option<&str>, kind: &str) -> CliResult<Vec<&'c T>> {
    match wanted {
        None => Ok(items.iter().collect()),
        Some(w) => items
            .iter()
            .find(|m| id_of(m) == w)
            .map(|m| vec![m])
            .ok_or_else(|| CliError::usage(format!("no {kind} model `{w}` in the config"))),
    }
}

pub fn stats(ctx: &mut Context<'_>) -> CliResult<()> {
    let splits: Vec<SplitName> = ctx.config.data.paths.keys().copied().collect();
    if splits.is_empty() {
        return Err(CliError::usage("the config lists no data splits"));
    }
    let mut all = Vec::new();
    for split in splits {
        all.push(compute_stats(&load(ctx, split)?));
    }
    let text = render_stats(&all);
    let dir = ctx.config.output_dir.clone();
    ctx.run.write(&dir.join("stats.json"), &json_bytes(&all)?)?;
    ctx.run.write(&dir.join("stats.txt"), text.as_bytes())?;
    say(ctx, &text)?;
    Ok(())
}

fn render_stats(all: &[SplitStats]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<8} {:>8}", "split", "examples");
    for class in LabelClass::ALL {
        let _ = write!(out, " {:>22}", format!("{} {}", class, class.name()));
    }
    let _ = writeln!(out, " {:>9}", "max words");
    for s in all {
        let _ = write!(out, "{:<8} {:>8}", s.name, s.count);
        for class in LabelClass::ALL {
            let cell = match (s.per_class_counts.get(&class), s.per_class_fractions.get(&class)) {
                (Some(c), Some(f)) => format!("{c} ({:.1}%)", 100.0 * f),
                _ => "-".into(),
            };
            let _ = write!(out, " {cell:>22}");
        }
        let _ = writeln!(out, " {:>9}", s.max_word_count);
    }
    out
}

pub fn train_models(ctx: &mut Context<'_>, model: Option<&str>) -> CliResult<()> {
    let specs: Vec<_> = pick(&ctx.config.models, |m| &m.id, model, "reference")?
        .into_iter()
        .cloned()
        .collect();
    if specs.is_empty() {
        return Err(CliError::usage("the config defines no reference models"));
    }
    let train_split = load(ctx, SplitName::Train)?;
    let dev = match ctx.config.data.paths.contains_key(&SplitName::Dev) {
        true => Some(load(ctx, SplitName::Dev)?),
        false => None,
    };
    let mut outputs = Vec::new();
    for spec in specs {
        let (params, log) = train(&train_split, dev.as_ref(), &spec.featurizer, &spec.train)
            .with_context(|| format!("training `{}`", spec.id))?;
        let last = log.epochs.last().expect("epochs >= 1");
        let summary = match last.dev_macro_f1 {
            Some(f1) => format!("{}: {} steps, final loss {:.4}, dev macro F1 {:.4}", spec.id, log.steps, last.mean_loss, f1),
            None => format!("{}: {} steps, final loss {:.4}", spec.id, log.steps, last.mean_loss),
        };
        let model = TrainedModel {
            model_id: spec.id.clone(),
            featurizer: spec.featurizer.clone(),
            train_config: spec.train.clone(),
            params,
        };
        let mut artifact = Vec::new();
        write_model(&mut artifact, &model)?;
        outputs.push((spec.id, artifact, log.to_json_lines(), summary));
    }
    for (id, artifact, log, summary) in outputs {
        let (model_path, log_path) = (ctx.config.model_path(&id), ctx.config.train_log_path(&id));
        ctx.run.write(&model_path, &artifact)?;
        ctx.run.write(&log_path, log.as_bytes())?;
        say(ctx, &summary)?;
    }
    Ok(())
}

fn default_splits(config: &ExperimentConfig, split: Option<SplitName>) -> Vec<SplitName> {
    match split {
        Some(s) => vec![s],
        None => [SplitName::Dev, SplitName::Test]
            .into_iter()
            .filter(|s| config.data.paths.contains_key(s))
            .collect(),
    }
}

pub fn predict(ctx: &mut Context<'_>, model: Option<&str>, split: Option<SplitName>) -> CliResult<()> {
    let ids: Vec<String> = pick(&ctx.config.models, |m| &m.id, model, "reference")?
        .into_iter()
        .map(|m| m.id.clone())
        .collect();
    let splits = default_splits(&ctx.config, split);
    if ids.is_empty() || splits.is_empty() {
        return Err(CliError::usage("nothing to predict: no reference models or no dev/test split"));
    }
    let mut models = Vec::new();
    for id in &ids {
        let path = ctx.config.model_path(id);
        let bytes = std::fs::read(&path)
            .with_context(|| format!("reading model artifact {} (run `train` first)", path.display()))?;
        ctx.run.push_input(&path, &bytes);
        let model = read_model(bytes.as_slice()).with_context(|| format!("loading {}", path.display()))?;
        if model.model_id != *id {
            return Err(CliError::Runtime(anyhow!("{} holds model `{}`, expected `{id}`", path.display(), model.model_id)));
        }
        models.push(model);
    }
    let mut outputs = Vec::new();
    for split in splits {
        let data = load(ctx, split)?;
        for model in &models {
            let records = predict_split(&model.params, &data, &model.featurizer, &model.model_id)?;
            let mut bytes = Vec::new();
            write_predictions(&mut bytes, &records)?;
            outputs.push((ctx.config.predictions_path(&model.model_id, split), bytes, records.len()));
        }
    }
    for (path, bytes, n) in outputs {
        ctx.run.write(&path, &bytes)?;
        say(ctx, &format!("{n} predictions -> {}", path.display()))?;
    }
    Ok(())
}

/// Validates external prediction files and stores canonical copies next to the reference models' predictions.
pub fn import(ctx: &mut Context<'_>, model: Option<&str>, split: Option<SplitName>) -> CliResult<()> {
    let externals: Vec<_> = pick(&ctx.config.external, |m| &m.id, model, "external")?
        .into_iter()
        .cloned()
        .collect();
    let mut outputs = Vec::new();
    let mut loaded: BTreeMap<SplitName, DatasetSplit> = BTreeMap::new();
    for x in &externals {
        for (&s, path) in &x.predictions {
            if split.is_some_and(|wanted| wanted != s) {
                continue;
            }
            if let std::collections::btree_map::Entry::Vacant(slot) = loaded.entry(s) {
                slot.insert(load(ctx, s)?);
            }
            let data = &loaded[&s];
            ctx.run.input(path)?;
            let records = import_predictions(path, data).with_context(|| format!("importing {}", path.display()))?;
            if let Some(r) = records.iter().find(|r| r.model_id != x.id) {
                return Err(CliError::Runtime(anyhow!(
                    "{}: record for model `{}` in the file of `{}`",
                    path.display(),
                    r.model_id,
                    x.id
                )));
            }
            // every example of the split must be covered
            let matrix = assemble_matrix(&records, std::slice::from_ref(&x.id), data)
                .with_context(|| format!("importing {}", path.display()))?;
            let mut bytes = Vec::new();
            write_predictions(&mut bytes, &matrix.to_records())?;
            outputs.push((ctx.config.predictions_path(&x.id, s), bytes, matrix.n_examples()));
        }
    }
    if outputs.is_empty() {
        return Err(CliError::usage("no external prediction files match"));
    }
    for (path, bytes, n) in outputs {
        ctx.run.write(&path, &bytes)?;
        say(ctx, &format!("{n} predictions imported -> {}", path.display()))?;
    }
    Ok(())
}

fn read_weights(ctx: &mut Context<'_>, path: &Path) -> CliResult<WeightVector> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("reading weights {} (run `search-weights` first)", path.display()))?;
    ctx.run.push_input(path, &bytes);
    let weights = serde_json::from_slice(&bytes).with_context(|| format!("parsing weights {}", path.display()))?;
    Ok(weights)
}

pub fn ensemble(ctx: &mut Context<'_>, split: SplitName, mode: Option<VoteMode>, weights: Option<&Path>) -> CliResult<()> {
    let mode = mode.unwrap_or(ctx.config.ensemble.mode);
    let weights = match (mode, weights) {
        (VoteMode::Hard, Some(_)) => return Err(CliError::usage("--weights only applies to weighted voting")),
        (VoteMode::Hard, None) => None,
        (VoteMode::Weighted, w) => {
            let path = w.map(Path::to_path_buf).unwrap_or_else(|| ctx.config.weights_path());
            Some(read_weights(ctx, &path)?)
        }
    };
    let (data, matrix) = load_matrix(ctx, split)?;
    let out = ensemble_predict(&matrix, &ensemble_config(&ctx.config, mode), weights.as_ref())?;

    let mut labels = String::from("id\tlabel\n");
    for (id, label) in matrix.example_ids().iter().zip(&out.labels) {
        let _ = writeln!(labels, "{id}\t{label}");
    }
    let mut breakdown = Vec::new();
    for b in &out.breakdown {
        serde_json::to_writer(&mut breakdown, b).map_err(anyhow::Error::from)?;
        breakdown.push(b'\n');
    }
    let report = match data.gold_labels() {
        Ok(gold) => Some(evaluate(&out.labels, &gold)?),
        Err(_) => None,
    };

    let base = ctx.config.output_dir.join("ensemble").join(format!("{split}.{mode}"));
    ctx.run.write(&with_suffix(&base, "labels.tsv"), labels.as_bytes())?;
    ctx.run.write(&with_suffix(&base, "breakdown.jsonl"), &breakdown)?;
    match report {
        Some(report) => {
            let text = format!("{mode} vote on {split} ({} models)\n{}", matrix.n_models(), report.render());
            ctx.run.write(&with_suffix(&base, "report.json"), &json_bytes(&report)?)?;
            ctx.run.write(&with_suffix(&base, "report.txt"), text.as_bytes())?;
            say(ctx, &text)?;
        }
        None => say(ctx, &format!("{mode} vote on {split}: {} labels (no gold, no report)", out.labels.len()))?,
    }
    Ok(())
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base.file_name().expect("file name").to_os_string();
    name.push(".");
    name.push(suffix);
    base.with_file_name(name)
}

pub fn search(ctx: &mut Context<'_>) -> CliResult<()> {
    let (data, matrix) = load_matrix(ctx, SplitName::Dev)?;
    let gold = data.gold_labels()?;
    let priority = ensemble_config(&ctx.config, VoteMode::Weighted).priority(&matrix)?;
    let result = search_weights(&matrix, &gold, ctx.config.ensemble.grid_denominator, &priority)?;
    let mut text = format!(
        "weight search on dev: {} models, step 1/{}, {} points evaluated\nuniform macro F1 {:.4}, best macro F1 {:.4}\n",
        matrix.n_models(),
        result.grid_denominator,
        result.evaluations,
        result.uniform_dev_macro_f1,
        result.best_dev_macro_f1
    );
    for (id, w) in result.best_weights.iter() {
        let _ = writeln!(text, "  {id:<24} {w:.4}");
    }
    let dir = ctx.config.output_dir.clone();
    ctx.run.write(&ctx.config.weights_path(), &json_bytes(&result.best_weights)?)?;
    ctx.run.write(&dir.join("search-weights.json"), &json_bytes(&result)?)?;
    ctx.run.write(&dir.join("search-weights.txt"), text.as_bytes())?;
    say(ctx, &text)?;
    Ok(())
}

pub fn subsets(ctx: &mut Context<'_>, split: SplitName) -> CliResult<()> {
    let (data, matrix) = load_matrix(ctx, split)?;
    let gold = data.gold_labels()?;
    let priority = ensemble_config(&ctx.config, VoteMode::Hard).priority(&matrix)?;
    let rows = subset_ensembles(&matrix, &gold, &priority)?;
    let text = subsets_to_text(&rows);
    let dir = ctx.config.output_dir.join("subsets");
    ctx.run.write(&dir.join(format!("{split}.csv")), subsets_to_csv(&rows).as_bytes())?;
    ctx.run.write(&dir.join(format!("{split}.txt")), text.as_bytes())?;
    say(ctx, &text)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Scored {
    model: String,
    approach: String,
    report: EvalReport,
    interval: ConfidenceInterval,
}

#[derive(Debug, Serialize)]
struct Evaluation {
    split: SplitName,
    models: Vec<Scored>,
    ensembles: Vec<Scored>,
}

fn scored(model: &str, approach: &str, pred: &[LabelClass], gold: &[LabelClass], resamples: usize, seed: u64) -> CliResult<Scored> {
    Ok(Scored {
        model: model.into(),
        approach: approach.into(),
        report: evaluate(pred, gold)?,
        interval: bootstrap_ci(pred, gold, resamples, seed)?,
    })
}

/// Score table of every member and the ensembles, or of a single predictions file.
pub fn evaluate_split(ctx: &mut Context<'_>, split: SplitName, file: Option<&Path>, resamples: Option<usize>) -> CliResult<()> {
    let resamples = resamples.unwrap_or(ctx.config.ensemble.bootstrap_resamples);
    if resamples == 0 {
        return Err(CliError::usage("--resamples must be at least 1"));
    }
    let seed = ctx.config.seed;
    let mut models = Vec::new();
    let mut ensembles = Vec::new();
    let name = match file {
        Some(path) => {
            let data = load(ctx, split)?;
            let gold = data.gold_labels()?;
            ctx.run.input(path)?;
            let file_handle = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let records = read_predictions(file_handle).with_context(|| format!("reading {}", path.display()))?;
            let mut ids: Vec<String> = records.iter().map(|r| r.model_id.clone()).collect();
            ids.sort();
            ids.dedup();
            let matrix = assemble_matrix(&records, &ids, &data)?;
            for (k, id) in ids.iter().enumerate() {
                models.push(scored(id, ctx.config.approach(id), matrix.row(k), &gold, resamples, seed)?);
            }
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "file".into())
        }
        None => {
            let (data, matrix) = load_matrix(ctx, split)?;
            let gold = data.gold_labels()?;
            for (k, id) in matrix.model_ids().iter().enumerate() {
                models.push(scored(id, ctx.config.approach(id), matrix.row(k), &gold, resamples, seed)?);
            }
            let hard = ensemble_predict(&matrix, &ensemble_config(&ctx.config, VoteMode::Hard), None)?;
            ensembles.push(scored("ensemble", "hard voting", &hard.labels, &gold, resamples, seed)?);
            let weights_path = ctx.config.weights_path();
            if weights_path.is_file() {
                let weights = read_weights(ctx, &weights_path)?;
                let weighted = ensemble_predict(&matrix, &ensemble_config(&ctx.config, VoteMode::Weighted), Some(&weights))?;
                ensembles.push(scored("ensemble", "weighted voting", &weighted.labels, &gold, resamples, seed)?);
            }
            split.to_string()
        }
    };
    let row = |s: &Scored| ScoreRow { model: s.model.clone(), approach: s.approach.clone(), macro_f1: s.report.macro_f1 };
    let mut text = format!("macro F1 on {split}\n");
    text.push_str(&render_score_table(
        &models.iter().map(row).collect::<Vec<_>>(),
        &ensembles.iter().map(row).collect::<Vec<_>>(),
    ));
    let _ = writeln!(text, "\n95% bootstrap intervals ({resamples} resamples)");
    for s in models.iter().chain(&ensembles) {
        let _ = writeln!(
            text,
            "  {:<24} {:<24} [{:.3}, {:.3}]",
            s.model, s.approach, s.interval.low, s.interval.high
        );
    }
    let evaluation = Evaluation { split, models, ensembles };
    let dir = ctx.config.output_dir.join("eval");
    ctx.run.write(&dir.join(format!("{name}.json")), &json_bytes(&evaluation)?)?;
    ctx.run.write(&dir.join(format!("{name}.txt")), text.as_bytes())?;
    say(ctx, &text)?;
    Ok(())
}
