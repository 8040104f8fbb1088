//! Shapiro-Wilk W test, Royston's AS R94 approximation.

use statrs::distribution::{ContinuousCDF, Normal};

use super::StatsError;

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ci| acc * x + ci)
}

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Upper-half coefficients a_1..a_{n/2} (positive, largest first).
pub fn coefficients(n: usize) -> Vec<f64> {
    let nn2 = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let norm = std_normal();
    let an = n as f64;
    let an25 = an + 0.25;
    let m: Vec<f64> = (1..=nn2).map(|i| norm.inverse_cdf((i as f64 - 0.375) / an25)).collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;
    let mut a = vec![0.0; nn2];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        (2, fac)
    } else {
        (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
    };
    for i in first..nn2 {
        a[i] = -m[i] / fac;
    }
    a
}

/// W statistic and p-value. Requires 3 ≤ n ≤ 5000 finite values that are not
/// all identical.
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64), StatsError> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(StatsError::SampleSize { n, min: 3, max: 5000 });
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    // location/scale normalisation keeps W independent of affine transforms
    let z: Vec<f64> = x.iter().map(|v| (v - x[0]) / range).collect();
    let a = coefficients(n);
    let numer: f64 = a.iter().enumerate().map(|(i, ai)| ai * (z[n - 1 - i] - z[i])).sum();
    let mean = z.iter().sum::<f64>() / n as f64;
    let ssq: f64 = z.iter().map(|v| (v - mean) * (v - mean)).sum();
    let w = (numer * numer / ssq).min(1.0);
    Ok((w, p_value(w, n)))
}

fn p_value(w: f64, n: usize) -> f64 {
    if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::FRAC_PI_3;
        return (pi6 * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0);
    }
    let an = n as f64;
    let mut w1 = (1.0 - w).ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if w1 >= gamma {
            return 1e-99;
        }
        w1 = -(gamma - w1).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (poly(&C5, xx), poly(&C6, xx).exp())
    };
    (1.0 - std_normal().cdf((w1 - m) / s)).clamp(0.0, 1.0)
}
