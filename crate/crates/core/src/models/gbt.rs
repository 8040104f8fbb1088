//! Multi-class gradient-boosted trees with the regularized second-order
//! objective and softmax link.

use serde::{Deserialize, Serialize};

use super::tree::{grow_regressor, BoostParams, SortedIndex, Tree};
use super::Classifier;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self { n_estimators: 200, learning_rate: 0.1, max_depth: 3, lambda: 1.0, gamma: 0.0 }
    }
}

/// `trees[c][m]` is the round-m tree for class c. Leaves hold raw weights
/// -G/(H+lambda); the margin is base_score + learning_rate * sum of leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtEnsemble {
    pub n_classes: usize,
    pub learning_rate: f64,
    pub base_score: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub trees: Vec<Vec<Tree>>,
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Summed softmax cross-entropy of margins against labels.
pub fn log_loss(margins: &[Vec<f64>], y: &[usize]) -> f64 {
    margins
        .iter()
        .zip(y)
        .map(|(z, &c)| {
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - z[c]
        })
        .sum()
}

/// Per-row gradients p - 1{y=c} and hessians p(1-p) for class c.
pub fn softmax_grad_hess(margins: &[Vec<f64>], y: &[usize], c: usize) -> (Vec<f64>, Vec<f64>) {
    margins
        .iter()
        .zip(y)
        .map(|(z, &yi)| {
            let p = softmax(z)[c];
            (p - if yi == c { 1.0 } else { 0.0 }, p * (1.0 - p))
        })
        .unzip()
}

/// Training fit; also returns the training log-loss before each round and
/// after the last.
pub fn fit_gbt_traced(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &GbtParams) -> (GbtEnsemble, Vec<f64>) {
    let n = x.len();
    let rows: Vec<usize> = (0..n).collect();
    let mut idx = SortedIndex::new(x, &rows);
    let pristine = idx.snapshot();
    let base = vec![0.0; n_classes];
    let mut margins = vec![base.clone(); n];
    let mut trees = vec![Vec::with_capacity(params.n_estimators); n_classes];
    let mut losses = Vec::with_capacity(params.n_estimators + 1);
    let bp = BoostParams { max_depth: params.max_depth, lambda: params.lambda, gamma: params.gamma };
    for _ in 0..params.n_estimators {
        losses.push(log_loss(&margins, y));
        let probs: Vec<Vec<f64>> = margins.iter().map(|z| softmax(z)).collect();
        let round: Vec<Tree> = (0..n_classes)
            .map(|c| {
                let (g, h): (Vec<f64>, Vec<f64>) = probs
                    .iter()
                    .zip(y)
                    .map(|(p, &yi)| (p[c] - if yi == c { 1.0 } else { 0.0 }, p[c] * (1.0 - p[c])))
                    .unzip();
                idx.reset_from(&pristine);
                grow_regressor(&mut idx, &g, &h, bp)
            })
            .collect();
        for (c, t) in round.into_iter().enumerate() {
            for (z, r) in margins.iter_mut().zip(x) {
                z[c] += params.learning_rate * t.predict_row(r)[0];
            }
            trees[c].push(t);
        }
    }
    losses.push(log_loss(&margins, y));
    let model = GbtEnsemble {
        n_classes,
        learning_rate: params.learning_rate,
        base_score: base,
        lambda: params.lambda,
        gamma: params.gamma,
        max_depth: params.max_depth,
        trees,
    };
    (model, losses)
}

pub fn fit_gbt(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &GbtParams) -> GbtEnsemble {
    fit_gbt_traced(x, y, n_classes, params).0
}

impl GbtEnsemble {
    pub fn margins(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|r| {
                (0..self.n_classes)
                    .map(|c| {
                        let s: f64 = self.trees[c].iter().map(|t| t.predict_row(r)[0]).sum();
                        self.base_score[c] + self.learning_rate * s
                    })
                    .collect()
            })
            .collect()
    }
}

impl Classifier for GbtEnsemble {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.margins(x).iter().map(|z| softmax(z)).collect()
    }
}
