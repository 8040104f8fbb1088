//! Small numeric helpers shared across modules.

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Two-pass population standard deviation.
pub fn population_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / xs.len() as f64).sqrt())
}

/// Two-pass sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some(ss / (xs.len() - 1) as f64)
}

/// Quantile of an ascending slice by linear interpolation between order
/// statistics (h = (n - 1) q).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Sorts a copy and returns the linear-interpolation quantile.
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

/// Rounds to `decimals` places, halves away from zero.
///
/// Values within 1e-9 relative of a half-way point are treated as exactly
/// half-way, so decimal inputs such as 88.505 round up despite their binary
/// representation.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = x * scale;
    let nudged = scaled + scaled.signum() * scaled.abs().max(1.0) * 1e-9;
    nudged.round() / scale
}

/// `100 * num / den` rounded to two decimals, half-up, in exact integer
/// arithmetic. Returns 0 when `den` is 0.
pub fn percent_half_up(num: u64, den: u64) -> f64 {
    if den == 0 {
        return 0.0;
    }
    let hundredths = (20_000 * u128::from(num) + u128::from(den)) / (2 * u128::from(den));
    hundredths as f64 / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let xs = [18.0, 21.0, 25.0];
        assert_eq!(quantile(&xs, 0.5), Some(21.0));
        assert_eq!(quantile(&xs, 0.25), Some(19.5));
        assert_eq!(quantile(&xs, 0.75), Some(23.0));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(percent_half_up(24, 205), 11.71);
        assert_eq!(percent_half_up(19, 205), 9.27);
        assert_eq!(percent_half_up(87, 205), 42.44);
        assert_eq!(percent_half_up(75, 205), 36.59);
        assert_eq!(percent_half_up(77, 87), 88.51);
        assert_eq!(percent_half_up(1, 8), 12.5);
        // 1/200 = 0.5% exactly; 1/800 = 0.125% rounds half-up to 0.13
        assert_eq!(percent_half_up(1, 800), 0.13);
    }

    #[test]
    fn round_half_up_decimal_inputs() {
        assert_eq!(round_half_up(88.505, 2), 88.51);
        assert_eq!(round_half_up(2.675, 2), 2.68);
        assert_eq!(round_half_up(-1.005, 2), -1.01);
        assert_eq!(round_half_up(1.004, 2), 1.0);
    }

    #[test]
    fn std_two_pass() {
        assert_eq!(population_std(&[1000.0, 3000.0]), Some(1000.0));
        assert_eq!(population_std(&[5.0]), Some(0.0));
        assert_eq!(sample_variance(&[1.0, 2.0, 3.0]), Some(1.0));
    }
}
