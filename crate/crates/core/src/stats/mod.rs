//! Normality, rank-sum and effect-size statistics for group comparisons.

mod compare;
mod effect;
mod mann_whitney;
mod shapiro;

use thiserror::Error;

use crate::labeling::Category;

pub use compare::{
    adjust_p, compare_groups, write_comparison_csv, write_normality_csv, CompareParams, Comparison, Correction,
    GroupComparisonRow, GroupSummary, NormalityRow, ALPHA, COMPARISON_HEADER,
};
pub use effect::{bootstrap_effect, cohens_d, BootstrapEffect, Interval, DEFAULT_RESAMPLES, MAX_DEGENERATE_SHARE};
pub use mann_whitney::{exact_u_counts, mann_whitney_u, MannWhitney, PMethod, NORMAL_APPROX_MIN, TIED_ENUMERATION_MAX};
pub use shapiro::{coefficients as shapiro_coefficients, shapiro_wilk};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample size {n} outside {min}..={max}")]
    SampleSize { n: usize, min: usize, max: usize },
    #[error("sample contains non-finite values")]
    NonFinite,
    #[error("zero variance")]
    ZeroVariance,
    #[error("empty sample")]
    EmptySample,
    #[error("effect size needs at least two values per group")]
    TooFewForEffect,
    #[error("degenerate samples")]
    DegenerateSamples,
    #[error("bootstrap needs at least one resample")]
    NoResamples,
    #[error("{degenerate} of {resamples} bootstrap replicates had zero pooled variance")]
    TooManyDegenerate { degenerate: usize, resamples: usize },
    #[error("group too small for bootstrap: {group} has {n} participant(s)")]
    GroupTooSmall { group: Category, n: usize },
}
