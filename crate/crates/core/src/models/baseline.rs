//! Majority-class and weighted-random baselines.

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::rng;

pub fn class_counts(y: &[usize], n_classes: usize) -> Vec<usize> {
    let mut c = vec![0; n_classes];
    for &v in y {
        c[v] += 1;
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Majority {
    pub n_classes: usize,
    pub class: usize,
}

/// Modal training class; ties go to the smaller index.
pub fn fit_majority(y: &[usize], n_classes: usize) -> Majority {
    let counts = class_counts(y, n_classes);
    let class = (0..n_classes).fold(0, |b, c| if counts[c] > counts[b] { c } else { b });
    Majority { n_classes, class }
}

impl Classifier for Majority {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|_| (0..self.n_classes).map(|c| f64::from(u8::from(c == self.class))).collect()).collect()
    }
}

/// Predicts a class drawn from the training class distribution. Each
/// `predict_scores` call replays stream 0 of `seed`, so the k-th row of any
/// call gets the same draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRandom {
    pub n_classes: usize,
    pub weights: Vec<f64>,
    pub seed: u64,
}

pub fn fit_weighted_random(y: &[usize], n_classes: usize, seed: u64) -> WeightedRandom {
    let counts = class_counts(y, n_classes);
    let n = y.len().max(1) as f64;
    WeightedRandom { n_classes, weights: counts.iter().map(|c| *c as f64 / n).collect(), seed }
}

impl Classifier for WeightedRandom {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let dist = WeightedIndex::new(&self.weights).ok();
        let mut g = rng::stream(self.seed, 0);
        x.iter()
            .map(|_| {
                let c = dist.as_ref().map_or(0, |d| d.sample(&mut g));
                (0..self.n_classes).map(|k| f64::from(u8::from(k == c))).collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_ties_and_counts() {
        let y: Vec<usize> = [vec![2; 87], vec![0; 24], vec![1; 19], vec![3; 75]].concat();
        assert_eq!(fit_majority(&y, 4).class, 2);
        assert_eq!(fit_majority(&[1, 0], 2).class, 0);
    }

    #[test]
    fn single_class_everywhere() {
        let y = vec![3; 6];
        let x = vec![vec![0.0]; 6];
        assert!(fit_majority(&y, 4).predict(&x).iter().all(|c| *c == 3));
        assert!(fit_weighted_random(&y, 4, 9).predict(&x).iter().all(|c| *c == 3));
    }

    #[test]
    fn weighted_random_is_reproducible() {
        let y = vec![0, 1, 1, 2, 2, 2];
        let x = vec![vec![0.0]; 50];
        let m = fit_weighted_random(&y, 3, 5);
        let a = m.predict(&x);
        assert_eq!(a, m.predict(&x));
        assert!(a.iter().collect::<std::collections::BTreeSet<_>>().len() > 1);
    }
}
