//! Binary tree arena shared by CART, random forest and boosting, plus the
//! presorted exact-greedy growers.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Node 0 is the root. A row goes left when `x[feature] < threshold`, or
/// when the value is missing (NaN) and `missing_left` is set. A cover absent
/// from a serialized tree reads as 0, which TreeSHAP rejects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        missing_left: bool,
        #[serde(default)]
        cover: f64,
    },
    Leaf {
        value: Vec<f64>,
        #[serde(default)]
        cover: f64,
    },
}

impl TreeNode {
    /// Training samples that reached the node (with bootstrap multiplicity).
    pub fn cover(&self) -> f64 {
        match self {
            TreeNode::Internal { cover, .. } | TreeNode::Leaf { cover, .. } => *cover,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: Vec<f64>, cover: f64) -> Self {
        Self { nodes: vec![TreeNode::Leaf { value, cover }] }
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Internal { feature, threshold, left, right, missing_left, .. } => {
                    let v = x[*feature];
                    let go_left = if v.is_nan() { *missing_left } else { v < *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { value, .. } => value,
            TreeNode::Internal { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

/// Column-major training view with per-feature position lists sorted by
/// value. Position p stands for training row `rows[p]`; a node owns the same
/// range `lo..hi` in every list.
pub(crate) struct SortedIndex {
    vals: Vec<Vec<f64>>,
    cols: Vec<Vec<u32>>,
    go_left: Vec<bool>,
    buf: Vec<u32>,
}

impl SortedIndex {
    pub fn new(x: &[Vec<f64>], rows: &[usize]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let vals: Vec<Vec<f64>> = (0..d).map(|f| rows.iter().map(|&r| x[r][f]).collect()).collect();
        let cols = vals
            .iter()
            .map(|v| {
                let mut order: Vec<u32> = (0..rows.len() as u32).collect();
                order.sort_by(|&a, &b| v[a as usize].total_cmp(&v[b as usize]).then(a.cmp(&b)));
                order
            })
            .collect();
        Self { vals, cols, go_left: vec![false; rows.len()], buf: Vec::with_capacity(rows.len()) }
    }

    pub fn n_features(&self) -> usize {
        self.vals.len()
    }

    fn positions(&self, lo: usize, hi: usize) -> Vec<u32> {
        match self.cols.first() {
            Some(c) => c[lo..hi].to_vec(),
            None => (lo as u32..hi as u32).collect(),
        }
    }

    /// Stable partition of every list by `x[feature] < threshold`; returns
    /// the first right-hand index.
    fn partition(&mut self, lo: usize, hi: usize, feature: usize, threshold: f64) -> usize {
        for k in lo..hi {
            let p = self.cols[feature][k] as usize;
            self.go_left[p] = self.vals[feature][p] < threshold;
        }
        let mut mid = lo;
        for col in &mut self.cols {
            self.buf.clear();
            let mut w = lo;
            for k in lo..hi {
                let p = col[k];
                if self.go_left[p as usize] {
                    col[w] = p;
                    w += 1;
                } else {
                    self.buf.push(p);
                }
            }
            col[w..hi].copy_from_slice(&self.buf);
            mid = w;
        }
        mid
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m > a {
        m
    } else {
        b
    }
}

/// Features examined at one node: all in index order, or a sorted random
/// subset when `max_features < d`.
fn candidate_features(d: usize, max_features: usize, rng: Option<&mut ChaCha8Rng>) -> Vec<usize> {
    match rng {
        Some(g) if max_features < d => {
            let mut f = sample(g, d, max_features.max(1)).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..d).collect(),
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_features: usize,
}

/// Gini CART on class labels. Leaves hold class frequencies.
pub(crate) fn grow_classifier(
    x: &[Vec<f64>],
    y: &[usize],
    rows: &[usize],
    n_classes: usize,
    params: GrowParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let mut idx = SortedIndex::new(x, rows);
    let labels: Vec<usize> = rows.iter().map(|&r| y[r]).collect();
    let mut nodes = Vec::new();
    grow_cls_node(&mut idx, &labels, n_classes, params, &mut rng, 0, rows.len(), 0, &mut nodes);
    Tree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow_cls_node(
    idx: &mut SortedIndex,
    labels: &[usize],
    n_classes: usize,
    params: GrowParams,
    rng: &mut Option<&mut ChaCha8Rng>,
    lo: usize,
    hi: usize,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let n = hi - lo;
    let mut counts = vec![0usize; n_classes];
    for p in idx.positions(lo, hi) {
        counts[labels[p as usize]] += 1;
    }
    let me = nodes.len();
    let leaf = TreeNode::Leaf { value: counts.iter().map(|c| *c as f64 / n as f64).collect(), cover: n as f64 };
    nodes.push(leaf);
    let pure = counts.iter().filter(|c| **c > 0).count() <= 1;
    if depth >= params.max_depth || pure || n < 2 * params.min_samples_leaf.max(1) {
        return me;
    }

    let feats = candidate_features(idx.n_features(), params.max_features, rng.as_deref_mut());
    // maximise sum over children of (sum_c count_c^2) / n_child
    let mut best: Option<(f64, usize, f64)> = None;
    let mut left = vec![0usize; n_classes];
    for f in feats {
        left.iter_mut().for_each(|c| *c = 0);
        let (mut sl, mut sr): (f64, f64) = (0.0, counts.iter().map(|c| (c * c) as f64).sum());
        let col = &idx.cols[f];
        let vals = &idx.vals[f];
        for k in lo..hi - 1 {
            let p = col[k] as usize;
            let c = labels[p];
            // moving one sample of class c from right to left
            let (l, r) = (left[c] as f64, (counts[c] - left[c]) as f64);
            sl += 2.0 * l + 1.0;
            sr -= 2.0 * r - 1.0;
            left[c] += 1;
            let nl = k + 1 - lo;
            let nr = n - nl;
            if nl < params.min_samples_leaf || nr < params.min_samples_leaf {
                continue;
            }
            let (a, b) = (vals[p], vals[col[k + 1] as usize]);
            if !(a < b) {
                continue;
            }
            let score = sl / nl as f64 + sr / nr as f64;
            if best.is_none_or(|(s, _, _)| score > s) {
                best = Some((score, f, midpoint(a, b)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else { return me };
    let mid = idx.partition(lo, hi, feature, threshold);
    let l = grow_cls_node(idx, labels, n_classes, params, rng, lo, mid, depth + 1, nodes);
    let r = grow_cls_node(idx, labels, n_classes, params, rng, mid, hi, depth + 1, nodes);
    nodes[me] = TreeNode::Internal { feature, threshold, left: l, right: r, missing_left: true, cover: n as f64 };
    me
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BoostParams {
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
}

/// Second-order regression tree on gradients and hessians. Leaves hold the
/// single weight -G/(H+lambda).
pub(crate) fn grow_regressor(idx: &mut SortedIndex, g: &[f64], h: &[f64], params: BoostParams) -> Tree {
    let mut nodes = Vec::new();
    let n = g.len();
    grow_reg_node(idx, g, h, params, 0, n, 0, &mut nodes);
    Tree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow_reg_node(
    idx: &mut SortedIndex,
    g: &[f64],
    h: &[f64],
    params: BoostParams,
    lo: usize,
    hi: usize,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let n = hi - lo;
    let (mut gs, mut hs) = (0.0, 0.0);
    for p in idx.positions(lo, hi) {
        gs += g[p as usize];
        hs += h[p as usize];
    }
    let lam = params.lambda;
    let me = nodes.len();
    nodes.push(TreeNode::Leaf { value: vec![-gs / (hs + lam)], cover: n as f64 });
    if depth >= params.max_depth || n < 2 {
        return me;
    }
    let parent = gs * gs / (hs + lam);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..idx.n_features() {
        let col = &idx.cols[f];
        let vals = &idx.vals[f];
        let (mut gl, mut hl) = (0.0, 0.0);
        for k in lo..hi - 1 {
            let p = col[k] as usize;
            gl += g[p];
            hl += h[p];
            let (a, b) = (vals[p], vals[col[k + 1] as usize]);
            if !(a < b) {
                continue;
            }
            let (gr, hr) = (gs - gl, hs - hl);
            let gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent) - params.gamma;
            if best.is_none_or(|(s, _, _)| gain > s) {
                best = Some((gain, f, midpoint(a, b)));
            }
        }
    }
    // zero-gain splits are kept: symmetric problems such as XOR need them
    let Some((gain, feature, threshold)) = best else { return me };
    if gain < 0.0 {
        return me;
    }
    let mid = idx.partition(lo, hi, feature, threshold);
    let l = grow_reg_node(idx, g, h, params, lo, mid, depth + 1, nodes);
    let r = grow_reg_node(idx, g, h, params, mid, hi, depth + 1, nodes);
    nodes[me] = TreeNode::Internal { feature, threshold, left: l, right: r, missing_left: true, cover: n as f64 };
    me
}

impl SortedIndex {
    /// Fresh copy of the sorted lists for a new tree over the same rows.
    pub fn reset_from(&mut self, pristine: &[Vec<u32>]) {
        for (c, p) in self.cols.iter_mut().zip(pristine) {
            c.copy_from_slice(p);
        }
    }

    pub fn snapshot(&self) -> Vec<Vec<u32>> {
        self.cols.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(d: usize) -> GrowParams {
        GrowParams { max_depth: 10, min_samples_leaf: 1, max_features: d }
    }

    #[test]
    fn one_dimensional_split() {
        let x: Vec<Vec<f64>> = (0..4).map(|i| vec![f64::from(i)]).collect();
        let t = grow_classifier(&x, &[0, 0, 1, 1], &[0, 1, 2, 3], 2, full(1), None);
        match &t.nodes[0] {
            TreeNode::Internal { threshold, .. } => assert_eq!(*threshold, 1.5),
            _ => panic!("expected split"),
        }
        assert_eq!(t.n_leaves(), 2);
        assert_eq!(t.predict_row(&[0.2]), &[1.0, 0.0]);
        assert_eq!(t.predict_row(&[f64::NAN]), &[1.0, 0.0]);
    }

    #[test]
    fn pure_and_conflicting() {
        let x = vec![vec![1.0], vec![2.0]];
        assert_eq!(grow_classifier(&x, &[1, 1], &[0, 1], 2, full(1), None).nodes.len(), 1);
        let dup = vec![vec![1.0], vec![1.0]];
        let t = grow_classifier(&dup, &[1, 0], &[0, 1], 2, full(1), None);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_row(&[1.0]), &[0.5, 0.5]);
    }

    #[test]
    fn depth_limit_and_cover() {
        let x: Vec<Vec<f64>> = (0..16).map(|i| vec![f64::from(i)]).collect();
        let y: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let rows: Vec<usize> = (0..16).collect();
        let t = grow_classifier(&x, &y, &rows, 2, GrowParams { max_depth: 2, ..full(1) }, None);
        assert!(t.depth() <= 2);
        for n in &t.nodes {
            if let TreeNode::Internal { left, right, cover, .. } = n {
                assert_eq!(t.nodes[*left].cover() + t.nodes[*right].cover(), *cover);
            }
        }
    }

    #[test]
    fn midpoint_never_collapses_onto_left_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a < m && m <= b);
    }
}
