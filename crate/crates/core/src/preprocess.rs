//! Outlier filtering, imputation, scaling and SMOTE.
//!
//! Every `fit_*` sees training rows only; the evaluation harness owns the
//! split.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{mean, population_std, quantile};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("z-score filter needs at least 3 rows, got {0}")]
    TooFewRows(usize),
    #[error("threshold must be positive")]
    BadThreshold,
    #[error("z-score filter dropped every row")]
    AllDropped,
    #[error("no training values for feature(s) {0:?}")]
    EmptyFeature(Vec<usize>),
    #[error("column {0} mixes numeric and categorical values")]
    MixedColumn(usize),
    #[error("rows have inconsistent widths")]
    Ragged,
    #[error("class {class} has a single sample; SMOTE needs a neighbor")]
    SingletonClass { class: usize },
    #[error("SMOTE needs k >= 1")]
    BadK,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZTrigger {
    pub row: usize,
    pub feature: usize,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZFilter {
    pub kept: Vec<usize>,
    pub report: Vec<ZTrigger>,
}

pub const DEFAULT_Z_THRESHOLD: f64 = 3.0;

/// Drops rows with any |z| strictly above `threshold`. Column mean and
/// population std use the non-missing entries; constant columns never trigger.
pub fn zscore_filter(rows: &[Vec<Option<f64>>], threshold: f64) -> Result<ZFilter, PreprocessError> {
    if rows.len() < 3 {
        return Err(PreprocessError::TooFewRows(rows.len()));
    }
    if !(threshold > 0.0) {
        return Err(PreprocessError::BadThreshold);
    }
    let d = width(rows)?;
    let mut report = Vec::new();
    for j in 0..d {
        let col: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
        let (Some(m), Some(s)) = (mean(&col), population_std(&col)) else { continue };
        if s <= 0.0 {
            continue;
        }
        for (i, r) in rows.iter().enumerate() {
            if let Some(x) = r[j] {
                let z = (x - m) / s;
                if z.abs() > threshold {
                    report.push(ZTrigger { row: i, feature: j, z });
                }
            }
        }
    }
    report.sort_by_key(|t| (t.row, t.feature));
    let kept: Vec<usize> = (0..rows.len()).filter(|i| !report.iter().any(|t| t.row == *i)).collect();
    if kept.is_empty() {
        return Err(PreprocessError::AllDropped);
    }
    Ok(ZFilter { kept, report })
}

fn width<T>(rows: &[Vec<T>]) -> Result<usize, PreprocessError> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PreprocessError::Ragged);
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Num(f64),
    Cat(String),
}

/// Per-column fill values: median for numeric columns, mode for categorical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputePlan {
    pub fills: Vec<Value>,
}

pub fn fit_impute(rows: &[Vec<Option<Value>>]) -> Result<ImputePlan, PreprocessError> {
    let d = width(rows)?;
    let mut fills = Vec::with_capacity(d);
    let mut empty = Vec::new();
    for j in 0..d {
        let mut nums = Vec::new();
        let mut cats: BTreeMap<&str, usize> = BTreeMap::new();
        for r in rows {
            match &r[j] {
                Some(Value::Num(x)) => nums.push(*x),
                Some(Value::Cat(s)) => *cats.entry(s.as_str()).or_default() += 1,
                None => {}
            }
        }
        match (nums.is_empty(), cats.is_empty()) {
            (false, false) => return Err(PreprocessError::MixedColumn(j)),
            (true, true) => {
                empty.push(j);
                fills.push(Value::Num(f64::NAN));
            }
            (false, true) => fills.push(Value::Num(quantile(&nums, 0.5).expect("non-empty"))),
            (true, false) => {
                // BTreeMap iterates lexicographically, so the first maximum wins ties
                let best = cats.values().copied().max().expect("non-empty");
                let mode = cats.iter().find(|(_, c)| **c == best).map(|(k, _)| k.to_string()).expect("non-empty");
                fills.push(Value::Cat(mode));
            }
        }
    }
    if !empty.is_empty() {
        return Err(PreprocessError::EmptyFeature(empty));
    }
    Ok(ImputePlan { fills })
}

/// Numeric-only convenience over `fit_impute`.
pub fn fit_impute_numeric(rows: &[Vec<Option<f64>>]) -> Result<ImputePlan, PreprocessError> {
    let wrapped: Vec<Vec<Option<Value>>> = rows.iter().map(|r| r.iter().map(|v| v.map(Value::Num)).collect()).collect();
    fit_impute(&wrapped)
}

impl ImputePlan {
    pub fn apply(&self, rows: &[Vec<Option<Value>>]) -> Vec<Vec<Value>> {
        rows.iter()
            .map(|r| r.iter().zip(&self.fills).map(|(v, f)| v.clone().unwrap_or_else(|| f.clone())).collect())
            .collect()
    }

    /// Fills numeric rows; panics if the plan holds a categorical column.
    pub fn apply_numeric(&self, rows: &[Vec<Option<f64>>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .zip(&self.fills)
                    .map(|(v, f)| match (v, f) {
                        (Some(x), _) => *x,
                        (None, Value::Num(m)) => *m,
                        (None, Value::Cat(_)) => panic!("categorical fill applied to numeric matrix"),
                    })
                    .collect()
            })
            .collect()
    }

    pub fn medians(&self) -> Vec<f64> {
        self.fills.iter().map(|f| if let Value::Num(m) = f { *m } else { f64::NAN }).collect()
    }
}

pub const STD_FLOOR: f64 = 1e-12;

/// Standard scaler with population std. Columns whose std is at or below
/// `STD_FLOOR` map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FittedScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, PreprocessError> {
        let d = width(rows)?;
        if rows.is_empty() {
            return Err(PreprocessError::TooFewRows(0));
        }
        let (mut mu, mut sd) = (Vec::with_capacity(d), Vec::with_capacity(d));
        for j in 0..d {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            mu.push(mean(&col).expect("non-empty"));
            sd.push(population_std(&col).expect("non-empty"));
        }
        Ok(Self { mean: mu, std: sd })
    }

    fn constant(&self, j: usize) -> bool {
        self.std[j] <= STD_FLOOR
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, x)| if self.constant(j) { 0.0 } else { (x - self.mean[j]) / self.std[j] })
                    .collect()
            })
            .collect()
    }

    pub fn inverse_transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, z)| if self.constant(j) { self.mean[j] } else { z * self.std[j] + self.mean[j] })
                    .collect()
            })
            .collect()
    }
}

pub const DEFAULT_SMOTE_K: usize = 5;

/// A synthetic row `base + u * (neighbor - base)`, indices into the input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    /// Original rows first and unchanged, then synthetic rows.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub n_original: usize,
    pub origins: Vec<SyntheticOrigin>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Oversamples every present class up to the largest class count. Class `c`
/// draws from stream `c` of `seed`.
pub fn smote(x: &[Vec<f64>], y: &[usize], k: usize, seed: u64) -> Result<SmoteOutput, PreprocessError> {
    if k == 0 {
        return Err(PreprocessError::BadK);
    }
    width(x)?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, c) in y.iter().enumerate() {
        by_class.entry(*c).or_default().push(i);
    }
    let target = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut out = SmoteOutput { x: x.to_vec(), y: y.to_vec(), n_original: x.len(), origins: Vec::new() };
    for (&class, members) in &by_class {
        let need = target - members.len();
        if need == 0 {
            continue;
        }
        if members.len() < 2 {
            return Err(PreprocessError::SingletonClass { class });
        }
        let kk = k.min(members.len() - 1);
        let neighbors: Vec<Vec<usize>> = members
            .iter()
            .map(|&i| {
                let mut cand: Vec<(f64, usize)> =
                    members.iter().filter(|&&j| j != i).map(|&j| (sq_dist(&x[i], &x[j]), j)).collect();
                cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                cand.into_iter().take(kk).map(|(_, j)| j).collect()
            })
            .collect();
        let mut g = rng::stream(seed, class as u64);
        for _ in 0..need {
            let m = g.gen_range(0..members.len());
            let base = members[m];
            let neighbor = neighbors[m][g.gen_range(0..kk)];
            let u: f64 = g.gen();
            let row = x[base].iter().zip(&x[neighbor]).map(|(a, b)| a + u * (b - a)).collect();
            out.x.push(row);
            out.y.push(class);
            out.origins.push(SyntheticOrigin { base, neighbor, u });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Vec<Vec<Option<f64>>> {
        v.iter().map(|x| vec![Some(*x), Some(1.0)]).collect()
    }

    #[test]
    fn z_boundaries() {
        let f = zscore_filter(&col(&[0.0, 0.0, 0.0, 0.0, 100.0]), 3.0).unwrap();
        assert_eq!(f.kept.len(), 5);
        let mut v = vec![0.0; 9];
        v.push(1000.0);
        let f = zscore_filter(&col(&v), 3.0).unwrap();
        assert_eq!(f.kept.len(), 10, "z = 3.0 exactly is kept");
        let mut v = vec![0.0; 19];
        v.push(1000.0);
        let f = zscore_filter(&col(&v), 3.0).unwrap();
        assert_eq!(f.kept, (0..19).collect::<Vec<_>>());
        assert_eq!(f.report.len(), 1);
        assert_eq!((f.report[0].row, f.report[0].feature), (19, 0));
        let f = zscore_filter(&col(&[2.0; 4]), 3.0).unwrap();
        assert_eq!(f.kept.len(), 4);
        assert_eq!(zscore_filter(&col(&[1.0, 2.0]), 3.0), Err(PreprocessError::TooFewRows(2)));
    }

    #[test]
    fn impute_numeric_and_categorical() {
        let plan = fit_impute_numeric(&[vec![Some(1.0)], vec![None], vec![Some(3.0)]]).unwrap();
        assert_eq!(plan.apply_numeric(&[vec![None]]), vec![vec![2.0]]);
        let cat = |s: &str| Some(Value::Cat(s.into()));
        let rows = vec![vec![cat("a")], vec![cat("a")], vec![cat("b")], vec![None]];
        let plan = fit_impute(&rows).unwrap();
        assert_eq!(plan.fills, vec![Value::Cat("a".into())]);
        let tie = vec![vec![cat("b")], vec![cat("a")]];
        assert_eq!(fit_impute(&tie).unwrap().fills, vec![Value::Cat("a".into())]);
        let full = vec![vec![Some(4.0), Some(5.0)]];
        let plan = fit_impute_numeric(&full).unwrap();
        assert_eq!(plan.apply_numeric(&full), vec![vec![4.0, 5.0]]);
        assert_eq!(
            fit_impute_numeric(&[vec![Some(1.0), None]]),
            Err(PreprocessError::EmptyFeature(vec![1]))
        );
    }

    #[test]
    fn scaler_round_trip_and_constant_columns() {
        let x = vec![vec![1.0, 7.0], vec![2.0, 7.0], vec![6.0, 7.0]];
        let s = FittedScaler::fit(&x).unwrap();
        let z = s.transform(&x);
        assert!(z.iter().all(|r| r[1] == 0.0));
        let c0: Vec<f64> = z.iter().map(|r| r[0]).collect();
        assert!(mean(&c0).unwrap().abs() < 1e-9);
        assert!((population_std(&c0).unwrap() - 1.0).abs() < 1e-9);
        let back = s.inverse_transform(&z);
        for (a, b) in back.iter().flatten().zip(x.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn smote_counts_and_segments() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0], vec![6.0, 5.0], vec![5.5, 6.0], vec![7.0, 7.0]];
        let y = vec![0, 0, 1, 1, 1, 1];
        let out = smote(&x, &y, 1, 9).unwrap();
        assert_eq!(out.x.len(), 8);
        assert_eq!(&out.x[..6], &x[..]);
        for row in &out.x[6..] {
            assert_eq!(row[0], row[1]);
            assert!((0.0..=1.0).contains(&row[0]));
        }
    }

    #[test]
    fn smote_identical_points() {
        let x = vec![vec![2.0, 3.0], vec![2.0, 3.0], vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let out = smote(&x, &[0, 0, 1, 1, 1], 5, 1).unwrap();
        assert_eq!(out.x[5], vec![2.0, 3.0]);
    }

    #[test]
    fn smote_singleton_errors() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert_eq!(smote(&x, &[0, 1, 1], 5, 1), Err(PreprocessError::SingletonClass { class: 0 }));
    }
}
