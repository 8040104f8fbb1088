//! Two-sided Mann-Whitney U test.
//!
//! Rank sums are kept doubled so midranks stay integral.

use statrs::distribution::{ContinuousCDF, Normal};

use super::StatsError;

/// Largest pooled size for which tied samples are enumerated exactly.
pub const TIED_ENUMERATION_MAX: usize = 12;
/// Smaller group size from which the normal approximation is used.
pub const NORMAL_APPROX_MIN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PMethod {
    Exact,
    ExactTies,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// min(U_a, U_b).
    pub u: f64,
    /// U for the first sample.
    pub u_a: f64,
    pub p: f64,
    pub method: PMethod,
}

/// Doubled midranks of the pooled sample (a first, then b) and tie group sizes.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1; doubled midrank = i + j + 2
        for k in i..=j {
            ranks[order[k]] = (i + j + 2) as u64;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Counts of U = 0..=m*n for sizes m, n without ties: coefficients of the
/// Gaussian binomial [m+n choose m]_q.
pub fn exact_u_counts(m: usize, n: usize) -> Vec<f64> {
    let (m, n) = if m <= n { (m, n) } else { (n, m) };
    let deg = m * n;
    let mut c = vec![0i128; deg + 1];
    c[0] = 1;
    for i in 1..=m {
        // multiply by (1 - q^(n+i))
        let s = n + i;
        for k in (s..=deg).rev() {
            c[k] -= c[k - s];
        }
        // divide by (1 - q^i)
        for k in i..=deg {
            c[k] += c[k - i];
        }
    }
    c.into_iter().map(|v| v as f64).collect()
}

fn two_sided(lower: f64, upper: f64) -> f64 {
    (2.0 * lower.min(upper)).clamp(0.0, 1.0)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let big_n = na + nb;
    let (ranks, ties) = doubled_midranks(&pooled);
    let r2a: u64 = ranks[..na].iter().sum();
    // 2 U_a = 2 R_a - n_a (n_a + 1)
    let u2a = r2a - (na * (na + 1)) as u64;
    let u2_total = 2 * (na * nb) as u64;
    let u_a = u2a as f64 / 2.0;
    let u = u2a.min(u2_total - u2a) as f64 / 2.0;
    let has_ties = ties.iter().any(|t| *t > 1);

    let (p, method) = if na.min(nb) < NORMAL_APPROX_MIN && !has_ties {
        let counts = exact_u_counts(na, nb);
        let total: f64 = counts.iter().sum();
        let k = (u2a / 2) as usize;
        let lower: f64 = counts[..=k].iter().sum::<f64>() / total;
        let upper: f64 = counts[k..].iter().sum::<f64>() / total;
        (two_sided(lower, upper), PMethod::Exact)
    } else if na.min(nb) < NORMAL_APPROX_MIN && big_n <= TIED_ENUMERATION_MAX {
        let (lower, upper) = enumerate_tied(&ranks, na, r2a);
        (two_sided(lower, upper), PMethod::ExactTies)
    } else {
        (normal_p(u_a, na, nb, &ties), PMethod::Normal)
    };
    Ok(MannWhitney { u, u_a, p, method })
}

/// P(R_a' ≤ obs) and P(R_a' ≥ obs) over all C(N, n_a) label assignments.
fn enumerate_tied(ranks: &[u64], na: usize, r2a_obs: u64) -> (f64, f64) {
    let n = ranks.len();
    let (mut total, mut le, mut ge) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let s: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        le += u64::from(s <= r2a_obs);
        ge += u64::from(s >= r2a_obs);
    }
    (le as f64 / total as f64, ge as f64 / total as f64)
}

fn normal_p(u_a: f64, na: usize, nb: usize, ties: &[usize]) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    let n = na + nb;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>() / (n * (n - 1.0));
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 {
        return 1.0;
    }
    let mu = na * nb / 2.0;
    let z = ((u_a - mu).abs() - 0.5) / var.sqrt();
    let norm = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * (1.0 - norm.cdf(z))).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_triples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.method, PMethod::Exact);
        assert!((r.p - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_samples() {
        let a = [3.0, 1.0, 2.0, 5.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.u, 8.0);
        assert_eq!(r.method, PMethod::ExactTies);
        assert!(r.p >= 0.99);
        let big: Vec<f64> = (0..20).map(f64::from).collect();
        let r = mann_whitney_u(&big, &big).unwrap();
        assert_eq!(r.u, 200.0);
        assert!(r.p >= 0.99);
    }

    #[test]
    fn swap_symmetry() {
        let a = [0.3, 1.7, 2.2, 0.9, 4.1];
        let b = [1.1, 2.9, 3.3, 5.0, 4.4, 3.8, 2.0];
        let r1 = mann_whitney_u(&a, &b).unwrap();
        let r2 = mann_whitney_u(&b, &a).unwrap();
        assert_eq!(r1.u, r2.u);
        assert!((r1.p - r2.p).abs() < 1e-15);
    }

    #[test]
    fn gaussian_binomial_counts() {
        // sizes 2 and 2: U in 0..=4 with counts 1,1,2,1,1
        assert_eq!(exact_u_counts(2, 2), vec![1.0, 1.0, 2.0, 1.0, 1.0]);
        let c = exact_u_counts(7, 300);
        let total: f64 = c.iter().sum();
        // C(307, 7)
        let binom = (0..7).fold(1.0f64, |acc, i| acc * (307 - i) as f64 / (i + 1) as f64);
        assert!((total - binom).abs() / binom < 1e-12);
    }

    #[test]
    fn all_tied_normal_path() {
        let a = vec![1.0; 10];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(mann_whitney_u(&[], &[1.0]), Err(StatsError::EmptySample));
    }
}
