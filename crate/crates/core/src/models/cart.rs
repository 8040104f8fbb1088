//! Decision tree and random forest classifiers.

use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_classifier, GrowParams, Tree};
use super::Classifier;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        Self { max_depth: 10, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_classes: usize,
    pub tree: Tree,
}

pub fn fit_cart(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &CartParams) -> DecisionTree {
    let d = x.first().map_or(0, Vec::len);
    let rows: Vec<usize> = (0..x.len()).collect();
    let grow = GrowParams { max_depth: params.max_depth, min_samples_leaf: params.min_samples_leaf, max_features: d };
    DecisionTree { n_classes, tree: grow_classifier(x, y, &rows, n_classes, grow, None) }
}

impl Classifier for DecisionTree {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.tree.predict_row(r).to_vec()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// `None` means max(1, floor(sqrt(d))).
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 10, max_features: None, min_samples_leaf: 1, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

pub fn default_max_features(d: usize) -> usize {
    ((d as f64).sqrt().floor() as usize).max(1)
}

/// Tree t draws its bootstrap sample and split features from stream t.
pub fn fit_random_forest(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &ForestParams, seed: u64) -> RandomForest {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: params.max_features.unwrap_or_else(|| default_max_features(d)).min(d),
    };
    let trees = (0..params.n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let mut g = rng::stream(seed, t);
            let rows: Vec<usize> =
                if params.bootstrap { (0..n).map(|_| g.gen_range(0..n)).collect() } else { (0..n).collect() };
            grow_classifier(x, y, &rows, n_classes, grow, Some(&mut g))
        })
        .collect();
    RandomForest { n_classes, trees }
}

impl Classifier for RandomForest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = self.trees.len() as f64;
        x.iter()
            .map(|r| {
                let mut acc = vec![0.0; self.n_classes];
                for t in &self.trees {
                    for (a, v) in acc.iter_mut().zip(t.predict_row(r)) {
                        *a += v;
                    }
                }
                acc.iter().map(|a| a / k).collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut g = rng::stream(seed, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let off = if c == 0 { -3.0 } else { 3.0 };
            x.push(vec![off + g.gen_range(-1.0..1.0), off + g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)]);
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn forest_reduces_to_cart() {
        let (x, y) = blobs(40, 2);
        let cart = fit_cart(&x, &y, 2, &CartParams::default());
        let p = ForestParams { n_trees: 1, max_features: Some(3), bootstrap: false, ..Default::default() };
        let rf = fit_random_forest(&x, &y, 2, &p, 7);
        assert_eq!(rf.trees[0], cart.tree);
        assert_eq!(rf.predict_scores(&x), cart.predict_scores(&x));
    }

    #[test]
    fn forest_fits_blobs_and_is_deterministic() {
        let (x, y) = blobs(60, 3);
        let p = ForestParams { n_trees: 50, ..Default::default() };
        let rf = fit_random_forest(&x, &y, 2, &p, 11);
        let acc = rf.predict(&x).iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
        assert!(acc >= 0.99);
        assert_eq!(rf, fit_random_forest(&x, &y, 2, &p, 11));
        for s in rf.predict_scores(&x) {
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cart_is_row_permutation_invariant() {
        let (x, y) = blobs(30, 5);
        let a = fit_cart(&x, &y, 2, &CartParams { max_depth: 4, min_samples_leaf: 2 });
        let perm: Vec<usize> = (0..30).rev().collect();
        let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let b = fit_cart(&xp, &yp, 2, &CartParams { max_depth: 4, min_samples_leaf: 2 });
        assert_eq!(a, b);
    }

    #[test]
    fn tie_goes_to_lower_class() {
        let x = vec![vec![1.0], vec![1.0]];
        let t = fit_cart(&x, &[1, 0], 2, &CartParams::default());
        assert_eq!(t.predict(&x), vec![0, 0]);
    }
}
