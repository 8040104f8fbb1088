//! k-nearest-neighbor classifier on Euclidean distance.

use serde::{Deserialize, Serialize};

use super::{Classifier, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub n_classes: usize,
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

pub fn fit_knn(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &KnnParams) -> Result<Knn, ModelError> {
    if params.k < 1 || params.k > x.len() {
        return Err(ModelError::BadK { k: params.k, n: x.len() });
    }
    Ok(Knn { n_classes, k: params.k, x: x.to_vec(), y: y.to_vec() })
}

impl Classifier for Knn {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Class frequencies among the k nearest rows; equal distances keep the
    /// lower training index.
    fn predict_scores(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|q| {
                let mut d: Vec<(f64, usize)> = self
                    .x
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut s = vec![0.0; self.n_classes];
                for (_, i) in &d[..self.k] {
                    s[self.y[*i]] += 1.0 / self.k as f64;
                }
                s
            })
            .collect()
    }
}
