//! Leave-one-person-out evaluation with nested hyperparameter search.
//!
//! Each outer fold holds out one participant. Everything fitted in a fold
//! (imputation medians, outlier filter, scaler, SMOTE, model) sees only that
//! fold's training participants.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explain::{explain_instance, ExplainError, InstanceShap, ShapMatrix, ShapSpace};
use crate::features::{participant_feature_names, ParticipantFeatureVector};
use crate::labeling::Category;
use crate::models::{
    fit_model, CartParams, Classifier, ForestParams, GbtParams, KnnParams, ModelError, ModelKind, ModelParams,
    SvmParams, TrainedModel,
};
use crate::numeric::percent_half_up;
use crate::preprocess::{
    fit_impute_numeric, smote, zscore_filter, FittedScaler, PreprocessError, DEFAULT_SMOTE_K, DEFAULT_Z_THRESHOLD,
};
use crate::rng::{derive_seed, stable_hash, stream};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {needed} participants, found {found}")]
    TooFewParticipants { needed: usize, found: usize },
    #[error("class {0} has fewer than two participants")]
    ClassTooSmall(String),
    #[error("empty model roster")]
    EmptyRoster,
    #[error("empty search space for {0}")]
    EmptyGrid(&'static str),
    #[error("preprocessing: {0}")]
    Preprocess(#[from] PreprocessError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("explain: {0}")]
    Explain(#[from] ExplainError),
    #[error("no fold results")]
    NoResults,
}

/// Participants with labels, in participant-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub x: Vec<Vec<Option<f64>>>,
    pub y: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

impl Dataset {
    /// Inner join of feature vectors and category labels.
    pub fn from_vectors(vectors: &[ParticipantFeatureVector], labels: &BTreeMap<String, Category>) -> Self {
        let mut rows: Vec<&ParticipantFeatureVector> =
            vectors.iter().filter(|v| labels.contains_key(&v.participant_id)).collect();
        rows.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
        Dataset {
            ids: rows.iter().map(|v| v.participant_id.clone()).collect(),
            x: rows.iter().map(|v| v.values.clone()).collect(),
            y: rows.iter().map(|v| labels[&v.participant_id].index()).collect(),
            feature_names: participant_feature_names(),
            class_names: Category::ALL.iter().map(|c| c.as_str().to_string()).collect(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub z_threshold: f64,
    pub smote_k: usize,
    pub inner_folds: usize,
    /// Grids larger than this are sampled down to this many points.
    pub search_budget: usize,
    /// Keep each fold's preprocessed matrices for auditing.
    pub keep_matrices: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { z_threshold: DEFAULT_Z_THRESHOLD, smote_k: DEFAULT_SMOTE_K, inner_folds: 3, search_budget: 20, keep_matrices: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub grid: Vec<ModelParams>,
}

impl ModelSpec {
    pub fn single(params: ModelParams) -> Self {
        Self { kind: params.kind(), grid: vec![params] }
    }

    /// Default search spaces.
    pub fn default_for(kind: ModelKind) -> Self {
        let grid = match kind {
            ModelKind::Gbt => [2, 3]
                .iter()
                .map(|&max_depth| ModelParams::Gbt(GbtParams { n_estimators: 100, max_depth, ..Default::default() }))
                .collect(),
            ModelKind::RandomForest => [1, 3]
                .iter()
                .map(|&min_samples_leaf| {
                    ModelParams::RandomForest(ForestParams { min_samples_leaf, ..Default::default() })
                })
                .collect(),
            ModelKind::Knn => [3, 5, 7, 9, 11].iter().map(|&k| ModelParams::Knn(KnnParams { k })).collect(),
            ModelKind::Svm => {
                [0.1, 1.0, 10.0].iter().map(|&c| ModelParams::Svm(SvmParams { c, ..Default::default() })).collect()
            }
            ModelKind::DecisionTree => vec![ModelParams::DecisionTree(CartParams::default())],
            ModelKind::Majority => vec![ModelParams::Majority],
            ModelKind::WeightedRandom => vec![ModelParams::WeightedRandom],
        };
        Self { kind, grid }
    }

    pub fn default_roster() -> Vec<ModelSpec> {
        ModelKind::ALL.iter().map(|k| ModelSpec::default_for(*k)).collect()
    }
}

/// Statistics fitted inside one fold; compared bit-for-bit by leakage tests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedStats {
    pub impute_medians: Vec<f64>,
    pub kept_train_ids: Vec<String>,
    pub scaler_mean: Option<Vec<f64>>,
    pub scaler_std: Option<Vec<f64>>,
    pub n_synthetic: usize,
}

/// A fold's model-ready matrices. Synthetic rows appear only in training.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<usize>,
    /// Participant id per training row; `None` marks a SMOTE row.
    pub train_ids: Vec<Option<String>>,
    pub test_x: Vec<Vec<f64>>,
    pub test_ids: Vec<String>,
    pub stats: FittedStats,
}

/// Preprocesses training rows `train` and test rows `test` of `data`.
pub fn prepare(
    data: &Dataset,
    train: &[usize],
    test: &[usize],
    kind: ModelKind,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<Prepared, EvalError> {
    let raw_train: Vec<Vec<Option<f64>>> = train.iter().map(|&i| data.x[i].clone()).collect();
    let plan = fit_impute_numeric(&raw_train)?;
    let imputed = plan.apply_numeric(&raw_train);

    let kept: Vec<usize> = if imputed.len() >= 3 {
        let wrapped: Vec<Vec<Option<f64>>> = imputed.iter().map(|r| r.iter().map(|v| Some(*v)).collect()).collect();
        zscore_filter(&wrapped, cfg.z_threshold)?.kept
    } else {
        (0..imputed.len()).collect()
    };
    let mut train_x: Vec<Vec<f64>> = kept.iter().map(|&k| imputed[k].clone()).collect();
    let train_y: Vec<usize> = kept.iter().map(|&k| data.y[train[k]]).collect();
    let kept_train_ids: Vec<String> = kept.iter().map(|&k| data.ids[train[k]].clone()).collect();
    let mut test_x = plan.apply_numeric(&test.iter().map(|&i| data.x[i].clone()).collect::<Vec<_>>());

    let mut scaler_mean = None;
    let mut scaler_std = None;
    if kind.needs_scaling() {
        let s = FittedScaler::fit(&train_x)?;
        train_x = s.transform(&train_x);
        test_x = s.transform(&test_x);
        scaler_mean = Some(s.mean);
        scaler_std = Some(s.std);
    }

    let mut train_ids: Vec<Option<String>> = kept_train_ids.iter().cloned().map(Some).collect();
    let mut train_y = train_y;
    let mut n_synthetic = 0;
    if !kind.is_baseline() {
        let (sx, sy) = oversample(&train_x, &train_y, cfg.smote_k, seed)?;
        n_synthetic = sx.len();
        train_x.extend(sx);
        train_y.extend(sy);
        train_ids.extend(std::iter::repeat_n(None, n_synthetic));
    }
    Ok(Prepared {
        train_x,
        train_y,
        train_ids,
        test_x,
        test_ids: test.iter().map(|&i| data.ids[i].clone()).collect(),
        stats: FittedStats { impute_medians: plan.medians(), kept_train_ids, scaler_mean, scaler_std, n_synthetic },
    })
}

/// SMOTE rows only. Classes with a single member cannot be interpolated and
/// are left at their original count.
fn oversample(x: &[Vec<f64>], y: &[usize], k: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<usize>), EvalError> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for c in y {
        *counts.entry(*c).or_default() += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    let singles: Vec<usize> = counts.iter().filter(|(_, n)| **n == 1 && max > 1).map(|(c, _)| *c).collect();
    if !singles.is_empty() {
        warn!("classes {singles:?} have one training member; SMOTE leaves them unbalanced");
    }
    let rows: Vec<usize> = (0..y.len()).filter(|i| !singles.contains(&y[*i])).collect();
    let sub_x: Vec<Vec<f64>> = rows.iter().map(|&i| x[i].clone()).collect();
    let sub_y: Vec<usize> = rows.iter().map(|&i| y[i]).collect();
    let out = smote(&sub_x, &sub_y, k, seed)?;
    Ok((out.x[out.n_original..].to_vec(), out.y[out.n_original..].to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub held_out_participant: String,
    pub true_label: usize,
    pub predicted_label: usize,
    pub predicted_scores: Vec<f64>,
    pub chosen_hyperparameters: ModelParams,
    pub fold_seed: u64,
    #[serde(skip)]
    pub stats: FittedStats,
    #[serde(skip)]
    pub shap: Option<InstanceShap>,
    #[serde(skip)]
    pub matrices: Option<Prepared>,
}

pub fn fold_seed(seed: u64, participant_id: &str) -> u64 {
    derive_seed(seed, stable_hash(participant_id))
}

/// Inner fold index for each position of `train`. Stratified by class unless
/// some class has a single member.
fn inner_assignment(data: &Dataset, train: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut g = stream(seed, 0);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pos, &i) in train.iter().enumerate() {
        by_class.entry(data.y[i]).or_default().push(pos);
    }
    let mut fold = vec![0; train.len()];
    if by_class.values().any(|m| m.len() < 2) {
        warn!("a class has one member in the outer training set; inner folds are unstratified");
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut g);
        for (r, pos) in order.into_iter().enumerate() {
            fold[pos] = r % k;
        }
        return fold;
    }
    // continue the round-robin across classes so fold sizes stay balanced
    let mut r = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut g);
        for &pos in members.iter() {
            fold[pos] = r % k;
            r += 1;
        }
    }
    fold
}

/// Unrounded macro-F1 over the classes present in truth or predictions.
pub fn macro_f1(truth: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fne = vec![0usize; n_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fne[t] += 1;
        }
    }
    let scores: Vec<f64> = (0..n_classes)
        .filter(|&c| tp[c] + fp[c] + fne[c] > 0)
        .map(|c| 2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fne[c]) as f64)
        .collect();
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

fn search_points(spec: &ModelSpec, budget: usize, seed: u64) -> Vec<usize> {
    let n = spec.grid.len();
    if n <= budget.max(1) {
        return (0..n).collect();
    }
    let mut g = stream(seed, 1);
    let mut pick = rand::seq::index::sample(&mut g, n, budget.max(1)).into_vec();
    pick.sort_unstable();
    pick
}

/// Inner-CV hyperparameter choice over the `train` rows; the first grid point
/// wins ties.
pub fn select_params(
    data: &Dataset,
    train: &[usize],
    spec: &ModelSpec,
    cfg: &EvalConfig,
    fseed: u64,
) -> Result<ModelParams, EvalError> {
    if spec.grid.len() == 1 {
        return Ok(spec.grid[0]);
    }
    let k = cfg.inner_folds.max(2);
    let assign = inner_assignment(data, train, k, derive_seed(fseed, 10));
    let mut folds = Vec::new();
    for f in 0..k {
        let tr: Vec<usize> = train.iter().zip(&assign).filter(|(_, a)| **a != f).map(|(i, _)| *i).collect();
        let te: Vec<usize> = train.iter().zip(&assign).filter(|(_, a)| **a == f).map(|(i, _)| *i).collect();
        if te.is_empty() || tr.is_empty() {
            continue;
        }
        let prep = prepare(data, &tr, &te, spec.kind, cfg, derive_seed(fseed, 20 + f as u64))?;
        folds.push((f, prep, te));
    }
    let mut best: Option<(f64, usize)> = None;
    for gi in search_points(spec, cfg.search_budget, fseed) {
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for (f, prep, te) in &folds {
            let m = fit_model(&spec.grid[gi], &prep.train_x, &prep.train_y, data.n_classes(), derive_seed(fseed, 30 + *f as u64))?;
            pred.extend(m.predict(&prep.test_x));
            truth.extend(te.iter().map(|&i| data.y[i]));
        }
        let score = macro_f1(&truth, &pred, data.n_classes());
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, gi));
        }
    }
    Ok(spec.grid[best.map_or(0, |b| b.1)])
}

/// Runs the fold that holds out participant `held_out`.
pub fn run_fold(data: &Dataset, held_out: usize, spec: &ModelSpec, cfg: &EvalConfig, seed: u64) -> Result<FoldResult, EvalError> {
    let pid = &data.ids[held_out];
    let fseed = fold_seed(seed, pid);
    let train: Vec<usize> = (0..data.len()).filter(|&i| i != held_out).collect();
    let chosen = select_params(data, &train, spec, cfg, fseed)?;
    let prep = prepare(data, &train, &[held_out], spec.kind, cfg, derive_seed(fseed, 2))?;
    debug_assert!(prep.train_ids.iter().all(|id| id.as_deref() != Some(pid.as_str())));
    let model = fit_model(&chosen, &prep.train_x, &prep.train_y, data.n_classes(), derive_seed(fseed, 1))?;
    let scores = model.predict_scores(&prep.test_x).remove(0);
    let shap = if spec.kind.is_tree_model() {
        Some(explain_instance(&model, pid, &prep.test_x[0], data.feature_names.len())?)
    } else {
        None
    };
    Ok(FoldResult {
        held_out_participant: pid.clone(),
        true_label: data.y[held_out],
        predicted_label: crate::models::argmax(&scores),
        predicted_scores: scores,
        chosen_hyperparameters: chosen,
        fold_seed: fseed,
        stats: prep.stats.clone(),
        shap,
        matrices: cfg.keep_matrices.then_some(prep),
    })
}

/// One result per participant, in dataset order.
pub fn loocv(data: &Dataset, spec: &ModelSpec, cfg: &EvalConfig, seed: u64) -> Result<Vec<FoldResult>, EvalError> {
    if spec.grid.is_empty() {
        return Err(EvalError::EmptyGrid(spec.kind.as_str()));
    }
    let needed = data.n_classes() + 1;
    if data.len() < needed {
        return Err(EvalError::TooFewParticipants { needed, found: data.len() });
    }
    for (c, name) in data.class_names.iter().enumerate() {
        if data.y.iter().filter(|y| **y == c).count() < 2 {
            return Err(EvalError::ClassTooSmall(name.clone()));
        }
    }
    (0..data.len()).into_par_iter().map(|i| run_fold(data, i, spec, cfg, seed)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Percentages rounded to two decimals, half-up.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub model_name: String,
    pub n: usize,
    pub overall_accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub macro_f1: f64,
}

pub fn compute_metrics(model_name: &str, folds: &[FoldResult], class_names: &[String]) -> Result<MetricsReport, EvalError> {
    if folds.is_empty() {
        return Err(EvalError::NoResults);
    }
    let k = class_names.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for f in folds {
        confusion[f.true_label][f.predicted_label] += 1;
    }
    let n = folds.len();
    let trace: usize = (0..k).map(|c| confusion[c][c]).sum();
    let per_class = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|r| r[c]).sum();
            let (fp, fne) = (predicted - tp, support - tp);
            ClassMetrics {
                class: class_names[c].clone(),
                precision: percent_half_up(tp as u64, predicted as u64),
                recall: percent_half_up(tp as u64, support as u64),
                f1: percent_half_up(2 * tp as u64, (2 * tp + fp + fne) as u64),
                support,
            }
        })
        .collect();
    let truth: Vec<usize> = folds.iter().map(|f| f.true_label).collect();
    let pred: Vec<usize> = folds.iter().map(|f| f.predicted_label).collect();
    Ok(MetricsReport {
        model_name: model_name.to_string(),
        n,
        overall_accuracy: percent_half_up(trace as u64, n as u64),
        per_class,
        confusion,
        macro_f1: macro_f1(&truth, &pred, k),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkEntry {
    pub kind: ModelKind,
    pub folds: Vec<FoldResult>,
    pub metrics: MetricsReport,
}

/// Every model sees the same folds and fold seeds.
pub fn run_benchmark(data: &Dataset, roster: &[ModelSpec], cfg: &EvalConfig, seed: u64) -> Result<Vec<BenchmarkEntry>, EvalError> {
    if roster.is_empty() {
        return Err(EvalError::EmptyRoster);
    }
    roster
        .iter()
        .map(|spec| {
            let folds = loocv(data, spec, cfg, seed)?;
            let metrics = compute_metrics(spec.kind.label(), &folds, &data.class_names)?;
            Ok(BenchmarkEntry { kind: spec.kind, folds, metrics })
        })
        .collect()
}

/// Markdown table: one row per model, accuracy then P/R/F1 per class.
pub fn classification_table(entries: &[BenchmarkEntry]) -> String {
    let mut s = String::new();
    let Some(first) = entries.first() else { return s };
    let classes: Vec<&str> = first.metrics.per_class.iter().map(|c| c.class.as_str()).collect();
    s.push_str("| Model | Accuracy |");
    for c in &classes {
        let _ = write!(s, " {c} P | {c} R | {c} F1 |");
    }
    s.push_str("\n|---|---:|");
    for _ in &classes {
        s.push_str("---:|---:|---:|");
    }
    s.push('\n');
    for e in entries {
        let _ = write!(s, "| {} | {:.2} |", e.metrics.model_name, e.metrics.overall_accuracy);
        for c in &e.metrics.per_class {
            let _ = write!(s, " {:.2} | {:.2} | {:.2} |", c.precision, c.recall, c.f1);
        }
        s.push('\n');
    }
    s
}

/// Fits on every participant: hyperparameters from inner CV over the whole
/// dataset, then preprocessing and the final model on all rows.
pub fn train_full(
    data: &Dataset,
    spec: &ModelSpec,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<(ModelParams, TrainedModel, FittedStats), EvalError> {
    if spec.grid.is_empty() {
        return Err(EvalError::EmptyGrid(spec.kind.as_str()));
    }
    let all: Vec<usize> = (0..data.len()).collect();
    let chosen = select_params(data, &all, spec, cfg, seed)?;
    let prep = prepare(data, &all, &[], spec.kind, cfg, derive_seed(seed, 2))?;
    let model = fit_model(&chosen, &prep.train_x, &prep.train_y, data.n_classes(), derive_seed(seed, 1))?;
    Ok((chosen, model, prep.stats))
}

/// Held-out SHAP rows of a tree model's folds, in participant order.
pub fn pooled_shap(entry: &BenchmarkEntry, data: &Dataset) -> Option<ShapMatrix> {
    let instances: Vec<InstanceShap> = entry.folds.iter().filter_map(|f| f.shap.clone()).collect();
    if instances.is_empty() {
        return None;
    }
    Some(ShapMatrix {
        model: entry.kind,
        space: match entry.kind {
            ModelKind::Gbt => ShapSpace::Margin,
            _ => ShapSpace::Probability,
        },
        feature_names: data.feature_names.clone(),
        classes: data.class_names.clone(),
        instances,
    })
}

pub fn write_predictions_csv<W: std::io::Write>(writer: W, entries: &[BenchmarkEntry], class_names: &[String]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["model".to_string(), "participant".to_string(), "true".to_string(), "predicted".to_string()];
    header.extend(class_names.iter().map(|c| format!("score_{c}")));
    w.write_record(&header)?;
    for e in entries {
        for f in &e.folds {
            let mut rec = vec![
                e.kind.as_str().to_string(),
                f.held_out_participant.clone(),
                class_names[f.true_label].clone(),
                class_names[f.predicted_label].clone(),
            ];
            rec.extend(f.predicted_scores.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes one fold's model-ready training or test matrix. Training rows carry
/// their participant id, or `synthetic` for SMOTE rows.
pub fn write_matrix_csv<W: std::io::Write>(
    writer: W,
    feature_names: &[String],
    ids: &[Option<String>],
    x: &[Vec<f64>],
    y: Option<&[usize]>,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["row".to_string()];
    if y.is_some() {
        header.push("label".into());
    }
    header.extend(feature_names.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in x.iter().enumerate() {
        let mut rec = vec![ids[i].clone().unwrap_or_else(|| "synthetic".into())];
        if let Some(y) = y {
            rec.push(y[i].to_string());
        }
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fold(t: usize, p: usize) -> FoldResult {
        FoldResult {
            held_out_participant: String::new(),
            true_label: t,
            predicted_label: p,
            predicted_scores: vec![],
            chosen_hyperparameters: ModelParams::Majority,
            fold_seed: 0,
            stats: FittedStats {
                impute_medians: vec![],
                kept_train_ids: vec![],
                scaler_mean: None,
                scaler_std: None,
                n_synthetic: 0,
            },
            shap: None,
            matrices: None,
        }
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|c| format!("c{c}")).collect()
    }

    #[test]
    fn perfect_and_one_sided_metrics() {
        let m = compute_metrics("m", &[fold(0, 0), fold(0, 0), fold(1, 1), fold(1, 1)], &names(2)).unwrap();
        assert_eq!(m.overall_accuracy, 100.0);
        assert!(m.per_class.iter().all(|c| c.precision == 100.0 && c.recall == 100.0 && c.f1 == 100.0));
        let m = compute_metrics("m", &[fold(0, 0), fold(1, 0)], &names(2)).unwrap();
        assert_eq!(m.overall_accuracy, 50.0);
        assert_eq!((m.per_class[1].precision, m.per_class[1].recall, m.per_class[1].f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn recall_rounding() {
        let mut folds: Vec<FoldResult> = (0..77).map(|_| fold(1, 1)).collect();
        folds.extend((0..10).map(|_| fold(1, 0)));
        let m = compute_metrics("m", &folds, &names(2)).unwrap();
        assert_eq!(m.per_class[1].recall, 88.51);
        assert_eq!(m.per_class[1].support, 87);
    }

    #[test]
    fn macro_f1_ignores_class_numbering() {
        let t = [0, 0, 1, 2, 2, 1];
        let p = [0, 1, 1, 2, 0, 1];
        let perm = |v: &[usize]| v.iter().map(|c| [2, 0, 1][*c]).collect::<Vec<_>>();
        assert!((macro_f1(&t, &p, 3) - macro_f1(&perm(&t), &perm(&p), 3)).abs() < 1e-15);
    }
}
