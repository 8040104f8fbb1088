//! Socially-lonely vs emotionally-lonely comparison table.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::effect::{bootstrap_effect, BootstrapEffect, DEFAULT_RESAMPLES};
use super::mann_whitney::mann_whitney_u;
use super::shapiro::shapiro_wilk;
use super::StatsError;
use crate::features::{participant_feature_names, ParticipantFeatureVector};
use crate::labeling::Category;
use crate::numeric::mean;
use crate::rng::{derive_seed, stable_hash};

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    #[default]
    None,
    Bonferroni,
    /// Benjamini-Hochberg step-up.
    Bh,
}

impl std::str::FromStr for Correction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Correction::None),
            "bonferroni" => Ok(Correction::Bonferroni),
            "bh" => Ok(Correction::Bh),
            _ => Err(format!("unknown correction {s:?} (none, bonferroni, bh)")),
        }
    }
}

/// Adjusted p-values in input order.
pub fn adjust_p(p: &[f64], correction: Correction) -> Vec<f64> {
    let m = p.len() as f64;
    match correction {
        Correction::None => p.to_vec(),
        Correction::Bonferroni => p.iter().map(|v| (v * m).min(1.0)).collect(),
        Correction::Bh => {
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
            let mut out = vec![0.0; p.len()];
            let mut running = 1.0f64;
            for (rank, &i) in order.iter().enumerate().rev() {
                running = running.min(p[i] * m / (rank + 1) as f64);
                out[i] = running.min(1.0);
            }
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    pub mean_ci_low: f64,
    pub mean_ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparisonRow {
    pub feature_name: String,
    pub group_a: GroupSummary,
    pub group_b: GroupSummary,
    pub mean_diff: f64,
    /// `None` when the pooled SD is zero or a group has under two values.
    pub cohens_d: Option<f64>,
    pub d_ci_low: Option<f64>,
    pub d_ci_high: Option<f64>,
    pub u_statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityRow {
    pub feature_name: String,
    pub group: Category,
    pub n: usize,
    pub w: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareParams {
    pub group_a: Category,
    pub group_b: Category,
    pub resamples: usize,
    pub seed: u64,
    pub correction: Correction,
}

impl Default for CompareParams {
    fn default() -> Self {
        Self {
            group_a: Category::SociallyLonely,
            group_b: Category::EmotionallyLonely,
            resamples: DEFAULT_RESAMPLES,
            seed: 1,
            correction: Correction::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<GroupComparisonRow>,
    pub normality: Vec<NormalityRow>,
}

fn column(vectors: &[&ParticipantFeatureVector], j: usize) -> Vec<f64> {
    vectors.iter().filter_map(|v| v.values[j]).collect()
}

fn group_summary(xs: &[f64], ci: Option<(f64, f64)>) -> GroupSummary {
    let m = mean(xs).unwrap_or(f64::NAN);
    let (lo, hi) = ci.unwrap_or((m, m));
    GroupSummary { n: xs.len(), mean: m, mean_ci_low: lo, mean_ci_high: hi }
}

fn compare_feature(name: &str, a: &[f64], b: &[f64], params: &CompareParams) -> Result<GroupComparisonRow, StatsError> {
    let seed = derive_seed(params.seed, stable_hash(name));
    let (boot, mut note): (Option<BootstrapEffect>, String) = if a.len() < 2 || b.len() < 2 {
        (None, "fewer than two observed values in a group".into())
    } else {
        match bootstrap_effect(a, b, params.resamples, seed) {
            Ok(r) => (Some(r), String::new()),
            Err(StatsError::DegenerateSamples) => (None, "zero pooled variance".into()),
            Err(e @ StatsError::TooManyDegenerate { .. }) => (None, e.to_string()),
            Err(e) => return Err(e),
        }
    };
    let (u, p) = if a.is_empty() || b.is_empty() {
        (0.0, 1.0)
    } else {
        let mw = mann_whitney_u(a, b)?;
        (mw.u, mw.p)
    };
    let constant = a.iter().chain(b).all(|x| Some(x) == a.first().or(b.first()));
    let p = if constant {
        note = "feature constant across both groups".into();
        1.0
    } else {
        p
    };
    let ga = group_summary(a, boot.as_ref().map(|r| (r.mean_a_ci.low, r.mean_a_ci.high)));
    let gb = group_summary(b, boot.as_ref().map(|r| (r.mean_b_ci.low, r.mean_b_ci.high)));
    Ok(GroupComparisonRow {
        feature_name: name.to_string(),
        mean_diff: ga.mean - gb.mean,
        group_a: ga,
        group_b: gb,
        cohens_d: boot.as_ref().map(|r| r.d_point),
        d_ci_low: boot.as_ref().map(|r| r.d_ci.low),
        d_ci_high: boot.as_ref().map(|r| r.d_ci.high),
        u_statistic: u,
        p_value: p,
        significant: p < ALPHA,
        note,
    })
}

/// One row per participant-level feature, ascending by p (ties keep column
/// order). Missing values are dropped per feature.
pub fn compare_groups(
    vectors: &[ParticipantFeatureVector],
    labels: &BTreeMap<String, Category>,
    params: &CompareParams,
) -> Result<Comparison, StatsError> {
    let pick = |c: Category| -> Vec<&ParticipantFeatureVector> {
        vectors.iter().filter(|v| labels.get(&v.participant_id) == Some(&c)).collect()
    };
    let (va, vb) = (pick(params.group_a), pick(params.group_b));
    for (c, g) in [(params.group_a, &va), (params.group_b, &vb)] {
        if g.len() < 2 {
            return Err(StatsError::GroupTooSmall { group: c, n: g.len() });
        }
    }
    let names = participant_feature_names();
    let mut rows = Vec::with_capacity(names.len());
    let mut normality = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let (a, b) = (column(&va, j), column(&vb, j));
        rows.push(compare_feature(name, &a, &b, params)?);
        for (group, xs) in [(params.group_a, &a), (params.group_b, &b)] {
            let sw = shapiro_wilk(xs).ok();
            normality.push(NormalityRow {
                feature_name: name.clone(),
                group,
                n: xs.len(),
                w: sw.map(|r| r.0),
                p: sw.map(|r| r.1),
            });
        }
    }
    let raw: Vec<f64> = rows.iter().map(|r| r.p_value).collect();
    for (row, p) in rows.iter_mut().zip(adjust_p(&raw, params.correction)) {
        row.p_value = p;
        row.significant = p < ALPHA;
    }
    rows.sort_by(|x, y| x.p_value.total_cmp(&y.p_value));
    Ok(Comparison { rows, normality })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub const COMPARISON_HEADER: [&str; 17] = [
    "feature", "mean_a", "ci_a_low", "ci_a_high", "mean_b", "ci_b_low", "ci_b_high", "mean_diff", "cohens_d", "d_ci_low",
    "d_ci_high", "u", "p", "significant", "n_a", "n_b", "note",
];

pub fn write_comparison_csv<W: Write>(writer: W, rows: &[GroupComparisonRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COMPARISON_HEADER)?;
    for r in rows {
        w.write_record([
            r.feature_name.clone(),
            r.group_a.mean.to_string(),
            r.group_a.mean_ci_low.to_string(),
            r.group_a.mean_ci_high.to_string(),
            r.group_b.mean.to_string(),
            r.group_b.mean_ci_low.to_string(),
            r.group_b.mean_ci_high.to_string(),
            r.mean_diff.to_string(),
            opt(r.cohens_d),
            opt(r.d_ci_low),
            opt(r.d_ci_high),
            r.u_statistic.to_string(),
            r.p_value.to_string(),
            r.significant.to_string(),
            r.group_a.n.to_string(),
            r.group_b.n.to_string(),
            r.note.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_normality_csv<W: Write>(writer: W, rows: &[NormalityRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "group", "n", "w", "p"])?;
    for r in rows {
        w.write_record([r.feature_name.clone(), r.group.as_str().to_string(), r.n.to_string(), opt(r.w), opt(r.p)])?;
    }
    w.flush()?;
    Ok(())
}
