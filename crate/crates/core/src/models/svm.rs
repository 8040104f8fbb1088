//! One-vs-rest linear SVM trained by shuffled-epoch sub-gradient descent.
//!
//! Per class the objective is 0.5 |w|^2 + C * mean hinge(y (w.x + b)),
//! i.e. lambda = 1/C on the per-sample scale. The bias is not regularized.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    /// Initial step; step t is eta0 / (1 + eta0 * lambda * t).
    pub eta0: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, epochs: 60, eta0: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub n_classes: usize,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Class c shuffles with stream c of `seed`.
pub fn fit_linear_svm(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &SvmParams, seed: u64) -> LinearSvm {
    let d = x.first().map_or(0, Vec::len);
    let lambda = 1.0 / params.c;
    let mut weights = Vec::with_capacity(n_classes);
    let mut bias = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let mut g = rng::stream(seed, c as u64);
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut t = 0usize;
        for _ in 0..params.epochs {
            order.shuffle(&mut g);
            for &i in &order {
                let eta = params.eta0 / (1.0 + params.eta0 * lambda * t as f64);
                let yi = if y[i] == c { 1.0 } else { -1.0 };
                let margin = yi * (dot(&w, &x[i]) + b);
                let shrink = 1.0 - eta * lambda;
                w.iter_mut().for_each(|v| *v *= shrink);
                if margin < 1.0 {
                    for (wj, xj) in w.iter_mut().zip(&x[i]) {
                        *wj += eta * yi * xj;
                    }
                    b += eta * yi;
                }
                t += 1;
            }
        }
        weights.push(w);
        bias.push(b);
    }
    LinearSvm { n_classes, weights, bias }
}

impl LinearSvm {
    /// Per-class objective 0.5 |w|^2 + C * mean hinge.
    pub fn objective(&self, x: &[Vec<f64>], y: &[usize], c_param: f64) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                let hinge: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(r, &yi)| {
                        let s = if yi == c { 1.0 } else { -1.0 };
                        (1.0 - s * (dot(&self.weights[c], r) + self.bias[c])).max(0.0)
                    })
                    .sum::<f64>()
                    / x.len() as f64;
                0.5 * dot(&self.weights[c], &self.weights[c]) + c_param * hinge
            })
            .collect()
    }
}

impl Classifier for LinearSvm {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| (0..self.n_classes).map(|c| dot(&self.weights[c], r) + self.bias[c]).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn separable() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut g = rng::stream(4, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let c = i % 2;
            let s = if c == 0 { -1.0 } else { 1.0 };
            x.push(vec![s * 2.0 + g.gen_range(-0.5..0.5), g.gen_range(-1.0..1.0)]);
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn separable_data_is_fit() {
        let (x, y) = separable();
        let p = SvmParams { c: 100.0, epochs: 200, ..Default::default() };
        let m = fit_linear_svm(&x, &y, 2, &p, 1);
        assert_eq!(m.predict(&x), y);
        let obj = m.objective(&x, &y, 1.0);
        let wn: Vec<f64> = m.weights.iter().map(|w| 0.5 * dot(w, w)).collect();
        // hinge part of the objective is (nearly) zero
        for (o, w) in obj.iter().zip(wn) {
            assert!(o - w < 0.02, "hinge {}", o - w);
        }
    }

    #[test]
    fn duplicated_data_keeps_the_solution() {
        let (x, y) = separable();
        let p = SvmParams { c: 1.0, epochs: 200, ..Default::default() };
        let a = fit_linear_svm(&x, &y, 2, &p, 3);
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<usize> = y.iter().chain(&y).copied().collect();
        let p2 = SvmParams { epochs: 100, ..p };
        let b = fit_linear_svm(&x2, &y2, 2, &p2, 3);
        assert_eq!(a.predict(&x), b.predict(&x));
        for (oa, ob) in a.objective(&x, &y, p.c).iter().zip(b.objective(&x2, &y2, p.c)) {
            assert!((oa - ob).abs() / oa < 0.05, "{oa} vs {ob}");
        }
    }

    #[test]
    fn zero_features_predict_bias_argmax() {
        let x = vec![vec![0.0, 0.0]; 5];
        let y = vec![1, 1, 1, 0, 2];
        let m = fit_linear_svm(&x, &y, 3, &SvmParams::default(), 0);
        let best = (0..3).fold(0, |b, c| if m.bias[c] > m.bias[b] { c } else { b });
        assert!(m.predict(&x).iter().all(|p| *p == best));
    }
}
