//! Path-dependent TreeSHAP for single trees and tree ensembles, and mean
//! |SHAP| feature rankings.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{GbtEnsemble, ModelKind, TrainedModel, Tree, TreeNode};

#[derive(Debug, Error, PartialEq)]
pub enum ExplainError {
    #[error("tree not SHAP-ready: node {0} has no positive cover")]
    NotShapReady(usize),
    #[error("instance has {got} features, model expects {expected}")]
    FeatureCount { got: usize, expected: usize },
    #[error("{0} models are not tree ensembles")]
    Unsupported(&'static str),
    #[error("empty SHAP matrix")]
    Empty,
    #[error("shap csv: {0}")]
    Csv(String),
}

/// Attributions of one tree for one instance: `phi[f][k]` for output k.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeShap {
    pub base: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
struct PathElem {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElem { feature, zero, one, weight: if l == 0 { 1.0 } else { 0.0 } });
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (l + 1) as f64;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / (l + 1) as f64;
    }
}

fn unwind(path: &mut Vec<PathElem>, i: usize) {
    let l = path.len() - 1;
    let (one, zero) = (path[i].one, path[i].zero);
    let mut n = path[l].weight;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = path[j].weight;
            path[j].weight = n * (l + 1) as f64 / ((j + 1) as f64 * one);
            n = t - path[j].weight * zero * (l - j) as f64 / (l + 1) as f64;
        } else {
            path[j].weight = path[j].weight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    for j in i..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElem], i: usize) -> f64 {
    let mut p = path.to_vec();
    unwind(&mut p, i);
    p.iter().map(|e| e.weight).sum()
}

fn check_covers(tree: &Tree) -> Result<(), ExplainError> {
    match tree.nodes.iter().position(|n| !(n.cover() > 0.0)) {
        Some(i) => Err(ExplainError::NotShapReady(i)),
        None => Ok(()),
    }
}

/// Cover-weighted mean leaf value.
pub fn expected_value(tree: &Tree) -> Vec<f64> {
    let root = tree.nodes[0].cover();
    let mut acc: Vec<f64> = Vec::new();
    for n in &tree.nodes {
        if let TreeNode::Leaf { value, cover } = n {
            acc.resize(value.len(), 0.0);
            for (a, v) in acc.iter_mut().zip(value) {
                *a += v * cover / root;
            }
        }
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    x: &[f64],
    j: usize,
    mut path: Vec<PathElem>,
    zero: f64,
    one: f64,
    feature: Option<usize>,
    phi: &mut [Vec<f64>],
) {
    extend(&mut path, zero, one, feature);
    match &tree.nodes[j] {
        TreeNode::Leaf { value, .. } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let e = path[i];
                let f = e.feature.expect("only the root element has no feature");
                for (k, v) in value.iter().enumerate() {
                    phi[f][k] += w * (e.one - e.zero) * v;
                }
            }
        }
        TreeNode::Internal { feature: f, threshold, left, right, missing_left, cover } => {
            let v = x[*f];
            let go_left = if v.is_nan() { *missing_left } else { v < *threshold };
            let (hot, cold) = if go_left { (*left, *right) } else { (*right, *left) };
            let (mut iz, mut io) = (1.0, 1.0);
            if let Some(k) = path.iter().position(|e| e.feature == Some(*f)) {
                iz = path[k].zero;
                io = path[k].one;
                unwind(&mut path, k);
            }
            let rj = *cover;
            let (rh, rc) = (tree.nodes[hot].cover(), tree.nodes[cold].cover());
            recurse(tree, x, hot, path.clone(), iz * rh / rj, io, Some(*f), phi);
            recurse(tree, x, cold, path, iz * rc / rj, 0.0, Some(*f), phi);
        }
    }
}

/// Exact path-dependent Shapley values of one tree at `x`.
pub fn tree_shap(tree: &Tree, x: &[f64], n_features: usize) -> Result<TreeShap, ExplainError> {
    check_covers(tree)?;
    if x.len() != n_features {
        return Err(ExplainError::FeatureCount { got: x.len(), expected: n_features });
    }
    let base = expected_value(tree);
    let mut phi = vec![vec![0.0; base.len()]; n_features];
    recurse(tree, x, 0, Vec::with_capacity(tree.depth() + 2), 1.0, 1.0, None, &mut phi);
    Ok(TreeShap { base, phi })
}

/// Attributions for one instance: `phi[c][f]`, with `base[c] + sum_f
/// phi[c][f] == raw[c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceShap {
    pub instance: String,
    pub base: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    /// Model output explained: margins for GBT, probabilities otherwise.
    pub raw: Vec<f64>,
}

impl InstanceShap {
    pub fn max_additivity_residual(&self) -> f64 {
        self.phi
            .iter()
            .zip(&self.base)
            .zip(&self.raw)
            .map(|((p, b), r)| (b + p.iter().sum::<f64>() - r).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapSpace {
    Margin,
    Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub model: ModelKind,
    pub space: ShapSpace,
    pub feature_names: Vec<String>,
    pub classes: Vec<String>,
    pub instances: Vec<InstanceShap>,
}

fn sum_trees<'a>(trees: impl Iterator<Item = &'a Tree>, x: &[f64], d: usize, k: usize) -> Result<TreeShap, ExplainError> {
    let mut acc = TreeShap { base: vec![0.0; k], phi: vec![vec![0.0; k]; d] };
    for t in trees {
        let s = tree_shap(t, x, d)?;
        for (a, b) in acc.base.iter_mut().zip(&s.base) {
            *a += b;
        }
        for (pa, ps) in acc.phi.iter_mut().zip(&s.phi) {
            for (a, b) in pa.iter_mut().zip(ps) {
                *a += b;
            }
        }
    }
    Ok(acc)
}

fn gbt_instance(m: &GbtEnsemble, x: &[f64], d: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), ExplainError> {
    let mut base = Vec::with_capacity(m.n_classes);
    let mut phi = Vec::with_capacity(m.n_classes);
    for c in 0..m.n_classes {
        let s = sum_trees(m.trees[c].iter(), x, d, 1)?;
        base.push(m.base_score[c] + m.learning_rate * s.base[0]);
        phi.push(s.phi.iter().map(|p| m.learning_rate * p[0]).collect());
    }
    Ok((base, phi))
}

/// Transposes `phi[f][c]` into `phi[c][f]` with a scale factor.
fn by_class(s: &TreeShap, scale: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = s.base.len();
    let base = s.base.iter().map(|b| b * scale).collect();
    let phi = (0..k).map(|c| s.phi.iter().map(|p| p[c] * scale).collect()).collect();
    (base, phi)
}

/// Space in which a tree model is explained.
pub fn shap_space(model: &TrainedModel) -> Result<ShapSpace, ExplainError> {
    match model {
        TrainedModel::Gbt(_) => Ok(ShapSpace::Margin),
        TrainedModel::RandomForest(_) | TrainedModel::DecisionTree(_) => Ok(ShapSpace::Probability),
        TrainedModel::Knn(_) => Err(ExplainError::Unsupported("knn")),
        TrainedModel::Svm(_) => Err(ExplainError::Unsupported("svm")),
        TrainedModel::Majority(_) | TrainedModel::WeightedRandom(_) => Err(ExplainError::Unsupported("baseline")),
    }
}

/// Explains one row. GBT attributions sum over trees in margin space; forest
/// attributions average over trees in probability space.
pub fn explain_instance(model: &TrainedModel, id: &str, x: &[f64], n_features: usize) -> Result<InstanceShap, ExplainError> {
    shap_space(model)?;
    let row = [x.to_vec()];
    let (base, phi, raw) = match model {
        TrainedModel::Gbt(m) => {
            let (b, p) = gbt_instance(m, x, n_features)?;
            (b, p, m.margins(&row).remove(0))
        }
        TrainedModel::RandomForest(m) => {
            let s = sum_trees(m.trees.iter(), x, n_features, m.n_classes)?;
            let (b, p) = by_class(&s, 1.0 / m.trees.len() as f64);
            (b, p, crate::models::Classifier::predict_scores(m, &row).remove(0))
        }
        TrainedModel::DecisionTree(m) => {
            let s = tree_shap(&m.tree, x, n_features)?;
            let (b, p) = by_class(&s, 1.0);
            (b, p, m.tree.predict_row(x).to_vec())
        }
        _ => unreachable!("checked by shap_space"),
    };
    Ok(InstanceShap { instance: id.to_string(), base, phi, raw })
}

/// Explains every row of `x`, in parallel across instances.
pub fn ensemble_shap(
    model: &TrainedModel,
    kind: ModelKind,
    ids: &[String],
    x: &[Vec<f64>],
    feature_names: &[String],
    classes: &[String],
) -> Result<ShapMatrix, ExplainError> {
    let space = shap_space(model)?;
    let d = feature_names.len();
    let instances = ids
        .par_iter()
        .zip(x)
        .map(|(id, r)| explain_instance(model, id, r, d))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ShapMatrix { model: kind, space, feature_names: feature_names.to_vec(), classes: classes.to_vec(), instances })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedFeature {
    pub feature: String,
    pub mean_abs_shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceRanking {
    pub classes: Vec<String>,
    pub per_class: Vec<Vec<RankedFeature>>,
    /// Ranked by the class-summed mean |SHAP|.
    pub global: Vec<RankedFeature>,
}

fn sort_ranked(mut v: Vec<RankedFeature>) -> Vec<RankedFeature> {
    v.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap).then_with(|| a.feature.cmp(&b.feature)));
    v
}

/// Mean |SHAP| per class and feature, descending, ties by feature name.
pub fn rank_features(m: &ShapMatrix) -> Result<ImportanceRanking, ExplainError> {
    if m.instances.is_empty() {
        return Err(ExplainError::Empty);
    }
    let n = m.instances.len() as f64;
    let k = m.classes.len();
    let d = m.feature_names.len();
    let mut means = vec![vec![0.0; d]; k];
    for inst in &m.instances {
        for (c, row) in inst.phi.iter().enumerate() {
            for (f, v) in row.iter().enumerate() {
                means[c][f] += v.abs() / n;
            }
        }
    }
    let ranked = |vals: &[f64]| {
        sort_ranked(
            m.feature_names
                .iter()
                .zip(vals)
                .map(|(f, v)| RankedFeature { feature: f.clone(), mean_abs_shap: *v })
                .collect(),
        )
    };
    let total: Vec<f64> = (0..d).map(|f| means.iter().map(|r| r[f]).sum()).collect();
    Ok(ImportanceRanking {
        classes: m.classes.clone(),
        per_class: means.iter().map(|r| ranked(r)).collect(),
        global: ranked(&total),
    })
}

pub fn write_shap_csv<W: Write>(writer: W, m: &ShapMatrix) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["instance", "class", "feature", "value", "base"])?;
    for inst in &m.instances {
        for (c, class) in m.classes.iter().enumerate() {
            for (f, name) in m.feature_names.iter().enumerate() {
                w.write_record([
                    inst.instance.as_str(),
                    class.as_str(),
                    name.as_str(),
                    &inst.phi[c][f].to_string(),
                    &inst.base[c].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the long-format SHAP export back into per-instance matrices. Rows
/// must be grouped by instance with classes and features in a fixed order.
pub fn read_shap_csv<R: Read>(reader: R, model: ModelKind, space: ShapSpace) -> Result<ShapMatrix, ExplainError> {
    let err = |e: csv::Error| ExplainError::Csv(e.to_string());
    let mut rdr = csv::Reader::from_reader(reader);
    let mut classes: Vec<String> = Vec::new();
    let mut features: Vec<String> = Vec::new();
    let mut instances: Vec<InstanceShap> = Vec::new();
    let parse = |s: &str| s.parse::<f64>().map_err(|_| ExplainError::Csv(format!("bad number {s:?}")));
    for rec in rdr.records() {
        let rec = rec.map_err(err)?;
        let (id, class, feature) = (&rec[0], &rec[1], &rec[2]);
        let (value, base) = (parse(&rec[3])?, parse(&rec[4])?);
        if instances.last().is_none_or(|i| i.instance != id) {
            instances.push(InstanceShap { instance: id.to_string(), base: Vec::new(), phi: Vec::new(), raw: Vec::new() });
        }
        let inst = instances.last_mut().expect("pushed above");
        let c = match classes.iter().position(|x| x == class) {
            Some(c) => c,
            None => {
                classes.push(class.to_string());
                classes.len() - 1
            }
        };
        let f = match features.iter().position(|x| x == feature) {
            Some(f) => f,
            None => {
                features.push(feature.to_string());
                features.len() - 1
            }
        };
        if inst.phi.len() <= c {
            inst.phi.resize(c + 1, Vec::new());
            inst.base.resize(c + 1, 0.0);
        }
        if inst.phi[c].len() != f {
            return Err(ExplainError::Csv(format!("unexpected feature order at instance {id}")));
        }
        inst.phi[c].push(value);
        inst.base[c] = base;
    }
    for inst in &mut instances {
        inst.raw = inst.phi.iter().zip(&inst.base).map(|(p, b)| b + p.iter().sum::<f64>()).collect();
        if inst.phi.len() != classes.len() || inst.phi.iter().any(|p| p.len() != features.len()) {
            return Err(ExplainError::Csv(format!("incomplete rows for instance {}", inst.instance)));
        }
    }
    Ok(ShapMatrix { model, space, feature_names: features, classes, instances })
}

pub fn write_ranking_csv<W: Write>(writer: W, r: &ImportanceRanking) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["class", "rank", "feature", "mean_abs_shap"])?;
    let groups = r.classes.iter().map(String::as_str).zip(&r.per_class).chain(std::iter::once(("all", &r.global)));
    for (class, list) in groups {
        for (i, f) in list.iter().enumerate() {
            w.write_record([class, &(i + 1).to_string(), &f.feature, &f.mean_abs_shap.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn internal(feature: usize, threshold: f64, left: usize, right: usize, cover: f64) -> TreeNode {
        TreeNode::Internal { feature, threshold, left, right, missing_left: true, cover }
    }

    fn leaf(v: f64, cover: f64) -> TreeNode {
        TreeNode::Leaf { value: vec![v], cover }
    }

    /// E[f | x_S] with cover-weighted averaging over features outside S.
    fn cond_exp(t: &Tree, x: &[f64], s: u32, j: usize) -> f64 {
        match &t.nodes[j] {
            TreeNode::Leaf { value, .. } => value[0],
            TreeNode::Internal { feature, threshold, left, right, cover, .. } => {
                if s >> feature & 1 == 1 {
                    cond_exp(t, x, s, if x[*feature] < *threshold { *left } else { *right })
                } else {
                    let (l, r) = (t.nodes[*left].cover(), t.nodes[*right].cover());
                    (l * cond_exp(t, x, s, *left) + r * cond_exp(t, x, s, *right)) / cover
                }
            }
        }
    }

    fn brute_force(t: &Tree, x: &[f64], d: usize) -> Vec<f64> {
        let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
        (0..d)
            .map(|i| {
                (0u32..1 << d)
                    .filter(|s| s >> i & 1 == 0)
                    .map(|s| {
                        let k = s.count_ones() as usize;
                        let w = fact(k) * fact(d - k - 1) / fact(d);
                        w * (cond_exp(t, x, s | 1 << i, 0) - cond_exp(t, x, s, 0))
                    })
                    .sum()
            })
            .collect()
    }

    fn two_feature_tree() -> Tree {
        Tree {
            nodes: vec![
                internal(0, 0.5, 1, 4, 10.0),
                internal(1, 0.5, 2, 3, 6.0),
                leaf(1.0, 2.0),
                leaf(4.0, 4.0),
                internal(1, 0.5, 5, 6, 4.0),
                leaf(-2.0, 3.0),
                leaf(7.0, 1.0),
            ],
        }
    }

    #[test]
    fn matches_subset_enumeration() {
        let t = two_feature_tree();
        for x in [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] {
            let s = tree_shap(&t, &x, 2).unwrap();
            let bf = brute_force(&t, &x, 2);
            for f in 0..2 {
                assert!((s.phi[f][0] - bf[f]).abs() < 1e-12, "{x:?}");
            }
            let total: f64 = s.base[0] + s.phi.iter().map(|p| p[0]).sum::<f64>();
            assert!((total - t.predict_row(&x)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_feature_on_path() {
        let t = Tree {
            nodes: vec![
                internal(0, 0.5, 1, 2, 8.0),
                internal(0, 0.25, 3, 4, 5.0),
                leaf(3.0, 3.0),
                leaf(1.0, 2.0),
                internal(1, 0.5, 5, 6, 3.0),
                leaf(0.0, 1.0),
                leaf(10.0, 2.0),
            ],
        };
        for x in [[0.1, 0.0, 5.0], [0.3, 0.9, 5.0], [0.9, 0.1, 5.0], [0.3, 0.2, 5.0]] {
            let s = tree_shap(&t, &x, 3).unwrap();
            let bf = brute_force(&t, &x, 3);
            for f in 0..3 {
                assert!((s.phi[f][0] - bf[f]).abs() < 1e-12);
            }
            assert_eq!(s.phi[2][0], 0.0);
        }
    }

    #[test]
    fn single_leaf_and_missing_cover() {
        let t = Tree::leaf(vec![0.7], 5.0);
        let s = tree_shap(&t, &[1.0, 2.0], 2).unwrap();
        assert_eq!(s.base, vec![0.7]);
        assert!(s.phi.iter().all(|p| p[0] == 0.0));
        let bad = Tree { nodes: vec![internal(0, 0.5, 1, 2, 0.0), leaf(1.0, 1.0), leaf(2.0, 1.0)] };
        assert_eq!(tree_shap(&bad, &[0.0], 1), Err(ExplainError::NotShapReady(0)));
        let json = r#"{"nodes":[{"kind":"leaf","value":[1.0]}]}"#;
        let parsed: Tree = serde_json::from_str(json).unwrap();
        assert_eq!(tree_shap(&parsed, &[0.0], 1), Err(ExplainError::NotShapReady(0)));
    }

    #[test]
    fn depth_one_only_touches_its_feature() {
        let t = Tree { nodes: vec![internal(3, 0.0, 1, 2, 4.0), leaf(1.0, 1.0), leaf(5.0, 3.0)] };
        let s = tree_shap(&t, &[0.0, 0.0, 0.0, 1.0], 4).unwrap();
        for f in 0..3 {
            assert_eq!(s.phi[f][0], 0.0);
        }
        assert_eq!(s.phi[3][0], 5.0 - 4.0);
    }

    #[test]
    fn ranking_uses_absolute_values() {
        let m = ShapMatrix {
            model: ModelKind::Gbt,
            space: ShapSpace::Margin,
            feature_names: vec!["feature1".into(), "feature2".into()],
            classes: vec!["c".into()],
            instances: vec![
                InstanceShap { instance: "a".into(), base: vec![0.0], phi: vec![vec![1.0, 0.0]], raw: vec![1.0] },
                InstanceShap { instance: "b".into(), base: vec![0.0], phi: vec![vec![-1.0, 0.0]], raw: vec![-1.0] },
            ],
        };
        let r = rank_features(&m).unwrap();
        assert_eq!(r.per_class[0][0].feature, "feature1");
        assert_eq!(r.per_class[0][0].mean_abs_shap, 1.0);
        let one = ShapMatrix {
            instances: vec![InstanceShap { instance: "a".into(), base: vec![0.0], phi: vec![vec![2.0, -3.0]], raw: vec![-1.0] }],
            ..m.clone()
        };
        let r = rank_features(&one).unwrap();
        assert_eq!(r.per_class[0][0].feature, "feature2");
        assert_eq!(r.per_class[0][0].mean_abs_shap, 3.0);
        let mut buf = Vec::new();
        write_shap_csv(&mut buf, &m).unwrap();
        let back = read_shap_csv(buf.as_slice(), ModelKind::Gbt, ShapSpace::Margin).unwrap();
        assert_eq!(back, m);
    }
}
