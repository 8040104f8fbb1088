//! Cohen's d and its percentile bootstrap.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::StatsError;
use crate::numeric::{mean, quantile_sorted, sample_variance};
use crate::rng;

/// Standardized mean difference with pooled sample standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewForEffect);
    }
    d_unchecked(a, b).ok_or(StatsError::DegenerateSamples)
}

fn d_unchecked(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled_var = ((na - 1.0) * sample_variance(a)? + (nb - 1.0) * sample_variance(b)?) / (na + nb - 2.0);
    if !(pooled_var > 0.0) {
        return None;
    }
    // difference first, then scale: keeps d(a,b) = -d(b,a) bit for bit
    Some((mean(a)? - mean(b)?) / pooled_var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    fn percentile(mut xs: Vec<f64>) -> Interval {
        xs.sort_by(f64::total_cmp);
        Interval {
            low: quantile_sorted(&xs, 0.025).expect("non-empty"),
            high: quantile_sorted(&xs, 0.975).expect("non-empty"),
        }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapEffect {
    pub d_point: f64,
    pub d_ci: Interval,
    pub mean_a_ci: Interval,
    pub mean_b_ci: Interval,
    pub resamples: usize,
    /// Replicates skipped for zero pooled SD.
    pub degenerate: usize,
}

pub const DEFAULT_RESAMPLES: usize = 10_000;
/// Highest tolerated share of degenerate replicates.
pub const MAX_DEGENERATE_SHARE: f64 = 0.10;

fn resample<R: Rng>(rng: &mut R, xs: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..xs.len()).map(|_| xs[rng.gen_range(0..xs.len())]));
}

/// Percentile bootstrap of d and both group means. Replicate r draws from
/// stream r of `seed`, so results do not depend on the thread count.
pub fn bootstrap_effect(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<BootstrapEffect, StatsError> {
    if resamples == 0 {
        return Err(StatsError::NoResamples);
    }
    let d_point = cohens_d(a, b)?;
    let reps: Vec<(f64, f64, Option<f64>)> = (0..resamples as u64)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(a.len()), Vec::with_capacity(b.len())),
            |(ra, rb), r| {
                let mut g = rng::stream(seed, r);
                resample(&mut g, a, ra);
                resample(&mut g, b, rb);
                (mean(ra).unwrap(), mean(rb).unwrap(), d_unchecked(ra, rb))
            },
        )
        .collect();
    let ds: Vec<f64> = reps.iter().filter_map(|r| r.2).collect();
    let degenerate = resamples - ds.len();
    if degenerate as f64 > MAX_DEGENERATE_SHARE * resamples as f64 {
        return Err(StatsError::TooManyDegenerate { degenerate, resamples });
    }
    Ok(BootstrapEffect {
        d_point,
        d_ci: Interval::percentile(ds),
        mean_a_ci: Interval::percentile(reps.iter().map(|r| r.0).collect()),
        mean_b_ci: Interval::percentile(reps.iter().map(|r| r.1).collect()),
        resamples,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_d() {
        assert_eq!(cohens_d(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap(), -1.0);
        assert_eq!(cohens_d(&[1.0, 3.0], &[0.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn antisymmetric_and_scale_free() {
        let a = [1.3, 2.9, 0.4, 5.5];
        let b = [2.2, 7.1, 3.3];
        let d = cohens_d(&a, &b).unwrap();
        assert_eq!(d, -cohens_d(&b, &a).unwrap());
        let sa: Vec<f64> = a.iter().map(|x| x * 8.0).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * 8.0).collect();
        assert!((cohens_d(&sa, &sb).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn degenerate_errors() {
        assert_eq!(cohens_d(&[1.0, 1.0], &[1.0, 1.0]), Err(StatsError::DegenerateSamples));
        assert_eq!(cohens_d(&[1.0], &[1.0, 2.0]), Err(StatsError::TooFewForEffect));
    }

    #[test]
    fn identical_groups_contain_zero() {
        let a = [5.0, 5.0, 5.0, 6.0];
        // P(both resamples constant) = (81/256 + 1/256)^2 ≈ 0.1026, just over the limit
        match bootstrap_effect(&a, &a, 10_000, 3) {
            Err(StatsError::TooManyDegenerate { .. }) => {}
            other => panic!("expected degenerate error, got {other:?}"),
        }
        let a = [5.0, 5.0, 5.0, 6.0, 7.0, 4.0, 6.5, 5.5];
        let r = bootstrap_effect(&a, &a, 2000, 3).unwrap();
        assert_eq!(r.d_point, 0.0);
        assert!(r.d_ci.contains(0.0));
    }

    #[test]
    fn deterministic_for_seed() {
        let a = [1.0, 2.0, 4.0, 3.5, 2.2];
        let b = [2.0, 5.0, 4.4, 6.1];
        let r1 = bootstrap_effect(&a, &b, 500, 11).unwrap();
        let r2 = bootstrap_effect(&a, &b, 500, 11).unwrap();
        assert_eq!(r1, r2);
        assert_ne!(r1, bootstrap_effect(&a, &b, 500, 12).unwrap());
    }
}
