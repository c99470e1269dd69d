//! Small numeric helpers shared by feature extraction and winsorization.

/// Quantile of an ascending-sorted slice by linear interpolation between
/// order statistics (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `k`-th central moment, population form.
pub fn central_moment(values: &[f64], mean: f64, k: i32) -> f64 {
    values.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / values.len() as f64
}

/// Shannon entropy (natural log) of a frequency table.
pub fn entropy_nats(counts: impl IntoIterator<Item = usize>) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    -counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Gini impurity `1 - sum p^2` of a frequency table.
pub fn gini_impurity(counts: impl IntoIterator<Item = usize>) -> f64 {
    let counts: Vec<usize> = counts.into_iter().collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// D'Agostino–Pearson omnibus test. Returns `(K², p)` or `None` when the
/// sample is too small (`n < 8`) or has zero variance.
pub fn dagostino_pearson(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n < 8 {
        return None;
    }
    let m = mean(values);
    let m2 = central_moment(values, m, 2);
    if m2 <= 0.0 || !m2.is_finite() {
        return None;
    }
    let skew = central_moment(values, m, 3) / m2.powf(1.5);
    let kurt = central_moment(values, m, 4) / (m2 * m2);
    let nf = n as f64;

    // skewness test
    let y = skew * (((nf + 1.0) * (nf + 3.0)) / (6.0 * (nf - 2.0))).sqrt();
    let beta2 = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
        / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let y = if y == 0.0 { 1.0 } else { y };
    let z_skew = delta * (y / alpha + ((y / alpha).powi(2) + 1.0).sqrt()).ln();

    // kurtosis test
    let e = 3.0 * (nf - 1.0) / (nf + 1.0);
    let var_b2 = 24.0 * nf * (nf - 2.0) * (nf - 3.0) / ((nf + 1.0).powi(2) * (nf + 3.0) * (nf + 5.0));
    let x = (kurt - e) / var_b2.sqrt();
    let sqrt_beta1 = 6.0 * (nf * nf - 5.0 * nf + 2.0) / ((nf + 7.0) * (nf + 9.0))
        * ((6.0 * (nf + 3.0) * (nf + 5.0)) / (nf * (nf - 2.0) * (nf - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + x * (2.0 / (a - 4.0)).sqrt();
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt();
    let z_kurt = (term1 - term2) / (2.0 / (9.0 * a)).sqrt();

    let k2 = z_skew * z_skew + z_kurt * z_kurt;
    if !k2.is_finite() {
        return None;
    }
    // chi-squared survival with two degrees of freedom
    Some((k2, (-k2 / 2.0).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(quantile_sorted(&v, 0.05), 5.0);
        assert_eq!(quantile_sorted(&v, 0.95), 95.0);
        assert_eq!(quantile_sorted(&[0.0, 10.0], 0.05), 0.5);
        assert_eq!(quantile_sorted(&[0.0, 10.0], 0.95), 9.5);
        assert_eq!(quantile_sorted(&[1.0, 1.0, 1.0, 100.0], 0.75), 25.75);
    }

    #[test]
    fn entropy_of_uniform() {
        assert!((entropy_nats([1, 1, 1, 1]) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(entropy_nats([4]), 0.0);
        assert!((gini_impurity([1, 1]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn edit_distance() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("same", "same"), 0);
    }

    #[test]
    fn normality_reference_values() {
        // Reference values from scipy.stats.normaltest on the same samples.
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        let (k2, p) = dagostino_pearson(&v).unwrap();
        assert!((k2 - 3.992116190175702).abs() < 1e-9, "k2 = {k2}");
        assert!((p - 0.13586981489872588).abs() < 1e-9, "p = {p}");

        let skewed: Vec<f64> = (0..30).map(|i| (i as f64 / 3.0).exp()).collect();
        let (k2, p) = dagostino_pearson(&skewed).unwrap();
        assert!((k2 - 32.60502700359639).abs() < 1e-8, "k2 = {k2}");
        assert!(p < 0.01);

        assert!(dagostino_pearson(&[1.0; 10]).is_none());
        assert!(dagostino_pearson(&[1.0, 2.0, 3.0]).is_none());
    }
}
