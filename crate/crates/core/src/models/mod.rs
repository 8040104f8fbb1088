//! Classifiers behind one batch-scoring contract, and their JSON documents.

mod baseline;
mod cart;
mod gbt;
mod knn;
mod svm;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baseline::{class_counts, fit_majority, fit_weighted_random, Majority, WeightedRandom};
pub use cart::{default_max_features, fit_cart, fit_random_forest, CartParams, DecisionTree, ForestParams, RandomForest};
pub use gbt::{fit_gbt, fit_gbt_traced, log_loss, softmax, softmax_grad_hess, GbtEnsemble, GbtParams};
pub use knn::{fit_knn, Knn, KnnParams};
pub use svm::{fit_linear_svm, LinearSvm, SvmParams};
pub use tree::{Tree, TreeNode};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("k = {k} invalid for {n} training rows")]
    BadK { k: usize, n: usize },
    #[error("training set is empty")]
    Empty,
    #[error("model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model document version {0}")]
    Version(u32),
}

/// Index of the largest score; ties go to the smallest index.
pub fn argmax(scores: &[f64]) -> usize {
    (0..scores.len()).fold(0, |b, c| if scores[c] > scores[b] { c } else { b })
}

pub trait Classifier {
    fn n_classes(&self) -> usize;

    /// One row of class scores per input row.
    fn predict_scores(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>>;

    fn predict(&self, x: &[Vec<f64>]) -> Vec<usize> {
        self.predict_scores(x).iter().map(|s| argmax(s)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbt,
    RandomForest,
    Knn,
    Svm,
    Majority,
    DecisionTree,
    WeightedRandom,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Gbt,
        ModelKind::RandomForest,
        ModelKind::Knn,
        ModelKind::Svm,
        ModelKind::Majority,
        ModelKind::DecisionTree,
        ModelKind::WeightedRandom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gbt => "gbt",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Knn => "knn",
            ModelKind::Svm => "svm",
            ModelKind::Majority => "majority",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::WeightedRandom => "weighted_random",
        }
    }

    /// Label used in the classification table.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Gbt => "XGBoost",
            ModelKind::RandomForest => "RF",
            ModelKind::Knn => "KNN",
            ModelKind::Svm => "SVM",
            ModelKind::Majority => "BL1:MC",
            ModelKind::DecisionTree => "BL2:DT",
            ModelKind::WeightedRandom => "BL3:RWC",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, ModelKind::Majority | ModelKind::DecisionTree | ModelKind::WeightedRandom)
    }

    /// Distance- and margin-based models see standardized features.
    pub fn needs_scaling(self) -> bool {
        matches!(self, ModelKind::Knn | ModelKind::Svm)
    }

    pub fn is_tree_model(self) -> bool {
        matches!(self, ModelKind::Gbt | ModelKind::RandomForest | ModelKind::DecisionTree)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown model {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Gbt(GbtParams),
    RandomForest(ForestParams),
    Knn(KnnParams),
    Svm(SvmParams),
    Majority,
    DecisionTree(CartParams),
    WeightedRandom,
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Gbt(_) => ModelKind::Gbt,
            ModelParams::RandomForest(_) => ModelKind::RandomForest,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::Svm(_) => ModelKind::Svm,
            ModelParams::Majority => ModelKind::Majority,
            ModelParams::DecisionTree(_) => ModelKind::DecisionTree,
            ModelParams::WeightedRandom => ModelKind::WeightedRandom,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Gbt => ModelParams::Gbt(GbtParams::default()),
            ModelKind::RandomForest => ModelParams::RandomForest(ForestParams::default()),
            ModelKind::Knn => ModelParams::Knn(KnnParams::default()),
            ModelKind::Svm => ModelParams::Svm(SvmParams::default()),
            ModelKind::Majority => ModelParams::Majority,
            ModelKind::DecisionTree => ModelParams::DecisionTree(CartParams::default()),
            ModelKind::WeightedRandom => ModelParams::WeightedRandom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Gbt(GbtEnsemble),
    RandomForest(RandomForest),
    Knn(Knn),
    Svm(LinearSvm),
    Majority(Majority),
    DecisionTree(DecisionTree),
    WeightedRandom(WeightedRandom),
}

/// Trains one model. `n_classes` fixes the score width even when some class is
/// absent from `y`.
pub fn fit_model(
    params: &ModelParams,
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    if x.is_empty() {
        return Err(ModelError::Empty);
    }
    Ok(match params {
        ModelParams::Gbt(p) => TrainedModel::Gbt(fit_gbt(x, y, n_classes, p)),
        ModelParams::RandomForest(p) => TrainedModel::RandomForest(fit_random_forest(x, y, n_classes, p, seed)),
        ModelParams::Knn(p) => TrainedModel::Knn(fit_knn(x, y, n_classes, p)?),
        ModelParams::Svm(p) => TrainedModel::Svm(fit_linear_svm(x, y, n_classes, p, seed)),
        ModelParams::Majority => TrainedModel::Majority(fit_majority(y, n_classes)),
        ModelParams::DecisionTree(p) => TrainedModel::DecisionTree(fit_cart(x, y, n_classes, p)),
        ModelParams::WeightedRandom => TrainedModel::WeightedRandom(fit_weighted_random(y, n_classes, seed)),
    })
}

impl TrainedModel {
    fn inner(&self) -> &dyn Classifier {
        match self {
            TrainedModel::Gbt(m) => m,
            TrainedModel::RandomForest(m) => m,
            TrainedModel::Knn(m) => m,
            TrainedModel::Svm(m) => m,
            TrainedModel::Majority(m) => m,
            TrainedModel::DecisionTree(m) => m,
            TrainedModel::WeightedRandom(m) => m,
        }
    }
}

impl Classifier for TrainedModel {
    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn predict_scores(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.inner().predict_scores(x)
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Self-describing serialized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub params: ModelParams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub classes: Vec<String>,
    pub trained: TrainedModel,
}

impl ModelDocument {
    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Version(doc.format_version));
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_tie_rule() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }

    #[test]
    fn documents_round_trip_every_model() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![f64::from(i), f64::from(i % 3)]).collect();
        let y: Vec<usize> = (0..12).map(|i| (i % 3) as usize).collect();
        for kind in ModelKind::ALL {
            let mut params = ModelParams::default_for(kind);
            if let ModelParams::Gbt(p) = &mut params {
                p.n_estimators = 5;
            }
            if let ModelParams::RandomForest(p) = &mut params {
                p.n_trees = 5;
            }
            let trained = fit_model(&params, &x, &y, 3, 4).unwrap();
            let doc = ModelDocument {
                format_version: MODEL_FORMAT_VERSION,
                params,
                seed: 4,
                feature_names: vec!["a".into(), "b".into()],
                classes: vec!["x".into(), "y".into(), "z".into()],
                trained,
            };
            let back = ModelDocument::from_json(&doc.to_json().unwrap()).unwrap();
            assert_eq!(back.trained.predict_scores(&x), doc.trained.predict_scores(&x), "{kind:?}");
            let scores = back.trained.predict_scores(&x);
            let labels = back.trained.predict(&x);
            for (s, l) in scores.iter().zip(labels) {
                assert_eq!(argmax(s), l);
            }
        }
    }
}
