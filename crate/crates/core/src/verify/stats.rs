//! Goodness-of-fit statistics with fixed critical values.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Significance level used by every statistical acceptance check.
pub const SIGNIFICANCE: f64 = 1e-3;

/// Smallest expected count allowed in a chi-square bin.
pub const MIN_EXPECTED: f64 = 5.0;

/// Pearson statistic `sum (O_i - n p_i)^2 / (n p_i)`.
///
/// Every bin must have expected count at least [`MIN_EXPECTED`]; run
/// [`merge_sparse_bins`] first when that is not guaranteed.
pub fn chi_square_stat(observed: &[u64], expected_probs: &[f64], n: u64) -> Result<f64> {
    if observed.len() != expected_probs.len() {
        return Err(Error::DimensionMismatch {
            expected: expected_probs.len(),
            got: observed.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::Empty("chi-square bins"));
    }
    let total: f64 = expected_probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::BinSize(format!("expected probabilities sum to {total}")));
    }
    let n_f = n as f64;
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = n_f * p;
        if !(e >= MIN_EXPECTED) {
            return Err(Error::BinSize(format!("expected count {e} below {MIN_EXPECTED}")));
        }
        stat += (o as f64 - e).powi(2) / e;
    }
    Ok(stat)
}

/// Pools every bin with expected count below [`MIN_EXPECTED`] into one tail
/// bin, folding the tail into the smallest remaining bin if it is still too
/// small.
pub fn merge_sparse_bins(observed: &[u64], expected_probs: &[f64], n: u64) -> (Vec<u64>, Vec<f64>) {
    let n_f = n as f64;
    let mut obs = Vec::new();
    let mut probs = Vec::new();
    let (mut tail_o, mut tail_p) = (0u64, 0.0f64);
    for (&o, &p) in observed.iter().zip(expected_probs) {
        if n_f * p >= MIN_EXPECTED {
            obs.push(o);
            probs.push(p);
        } else {
            tail_o += o;
            tail_p += p;
        }
    }
    if tail_p > 0.0 || tail_o > 0 {
        if n_f * tail_p >= MIN_EXPECTED || probs.is_empty() {
            obs.push(tail_o);
            probs.push(tail_p);
        } else {
            let smallest = (0..probs.len())
                .min_by(|&a, &b| probs[a].total_cmp(&probs[b]))
                .expect("non-empty");
            obs[smallest] += tail_o;
            probs[smallest] += tail_p;
        }
    }
    (obs, probs)
}

/// Upper `significance` quantile of the chi-square law with `df` degrees of
/// freedom.
pub fn chi_square_critical(df: usize, significance: f64) -> f64 {
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - significance)
}

fn sorted_copy(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    if v.windows(2).any(|w| w[0] > w[1]) {
        v.sort_unstable_by(f64::total_cmp);
    }
    v
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_n - F|`.
pub fn ks_stat(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("KS samples"));
    }
    let sorted = sorted_copy(samples);
    let n = sorted.len() as f64;
    let d = sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    });
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov distance between empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("KS samples"));
    }
    let (a, b) = (sorted_copy(a), sorted_copy(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic coefficient `sqrt(-ln(significance / 2) / 2)` of the KS
/// critical value; 1.95 at 1e-3, 1.63 at 1e-2.
pub fn ks_coefficient(significance: f64) -> f64 {
    (-(significance / 2.0).ln() / 2.0).sqrt()
}

/// One-sample KS critical value for `n` samples.
pub fn ks_critical(n: usize, significance: f64) -> f64 {
    ks_coefficient(significance) / (n as f64).sqrt()
}

/// Two-sample KS critical value for sample sizes `n` and `m`.
pub fn ks_two_sample_critical(n: usize, m: usize, significance: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(significance) * ((n + m) / (n * m)).sqrt()
}

/// CDF of Beta(a, b).
pub fn beta_cdf(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        statrs::function::beta::beta_reg(a, b, x)
    }
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    crate::weights::mean_and_se(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_examples() {
        assert_eq!(chi_square_stat(&[50, 50], &[0.5, 0.5], 100).unwrap(), 0.0);
        assert!((chi_square_stat(&[60, 40], &[0.5, 0.5], 100).unwrap() - 4.0).abs() < 1e-12);
        assert!(matches!(chi_square_stat(&[10, 0], &[1.0, 0.0], 10), Err(Error::BinSize(_))));
        assert!(chi_square_stat(&[10], &[0.5, 0.5], 10).is_err());
    }

    #[test]
    fn sparse_bins_are_pooled() {
        let (o, p) = merge_sparse_bins(&[90, 5, 3, 2], &[0.9, 0.04, 0.03, 0.03], 100);
        assert_eq!(o, vec![90, 10]);
        assert!((p[1] - 0.1).abs() < 1e-12);
        // A tail too small on its own folds into the smallest kept bin.
        let (o, p) = merge_sparse_bins(&[50, 40, 2], &[0.5, 0.48, 0.02], 100);
        assert_eq!(o, vec![50, 42]);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn critical_values() {
        assert!((ks_coefficient(1e-3) - 1.9495).abs() < 1e-4);
        assert!((ks_coefficient(1e-2) - 1.6276).abs() < 1e-4);
        // Tabulated chi-square 0.999 quantiles.
        assert!((chi_square_critical(1, 1e-3) - 10.828).abs() < 1e-3);
        assert!((chi_square_critical(7, 1e-3) - 24.322).abs() < 1e-3);
        assert!((chi_square_critical(14, 1e-3) - 36.123).abs() < 1e-3);
    }

    #[test]
    fn ks_examples() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert!((ks_stat(&[0.5], uniform).unwrap() - 0.5).abs() < 1e-15);
        let quantiles: Vec<f64> = (1..=99).map(|i| i as f64 / 100.0).collect();
        assert!(ks_stat(&quantiles, uniform).unwrap() < 0.02);
        assert_eq!(ks_stat(&[0.0; 10], uniform).unwrap(), 1.0);
        assert!(ks_stat(&[], uniform).is_err());
        // Order of input does not matter.
        assert_eq!(ks_stat(&[0.9, 0.1], uniform).unwrap(), ks_stat(&[0.1, 0.9], uniform).unwrap());
    }

    #[test]
    fn two_sample_ks() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]).unwrap() - 0.5).abs() < 1e-15);
        // Ties across samples are stepped together.
        assert_eq!(ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn beta_cdf_uniform_and_linear() {
        assert!((beta_cdf(1.0, 1.0, 0.3) - 0.3).abs() < 1e-14);
        // Beta(2,1) has CDF x^2.
        assert!((beta_cdf(2.0, 1.0, 0.3) - 0.09).abs() < 1e-14);
        assert_eq!(beta_cdf(2.0, 3.0, -1.0), 0.0);
    }
}
