//! Small descriptive statistics shared by the trace summaries, features and
//! importance report.

/// Quantile of an ascending-sorted sample by linear interpolation between
/// order statistics at 0-indexed rank `h = (n - 1) * q`.
///
/// Panics if `sorted` is empty or `q` is outside `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level {q} outside [0, 1]");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Sort a copy of `values` ascending (total order on floats).
pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divides by `n`), two-pass.
pub fn pop_std(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / values.len() as f64).sqrt()
}

/// Sample standard deviation (divides by `n - 1`); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0];
        assert_eq!(quantile_sorted(&s, 0.5), 1.5);
        let s = [10.0, 20.0, 30.0, 40.0, 50.0];
        assert_eq!(quantile_sorted(&s, 0.0), 10.0);
        assert_eq!(quantile_sorted(&s, 1.0), 50.0);
        assert_eq!(quantile_sorted(&s, 0.5), 30.0);
        // h = 4 * 0.05 = 0.2
        assert!((quantile_sorted(&s, 0.05) - 12.0).abs() < 1e-12);
        assert!((quantile_sorted(&s, 0.95) - 48.0).abs() < 1e-12);
    }

    #[test]
    fn std_conventions() {
        assert_eq!(pop_std(&[1.0, 2.0]), 0.5);
        assert_eq!(pop_std(&[3.0]), 0.0);
        assert!((sample_std(&[1.0, 2.0]) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(sample_std(&[1.0]), 0.0);
    }
}
