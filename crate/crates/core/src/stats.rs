//! Estimators over independent replicas.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::scalar::CompensatedSum;

/// Sample mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub se: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary { n, mean: f64::NAN, var: f64::NAN, se: f64::NAN };
    }
    let mean = xs.iter().copied().collect::<CompensatedSum<f64>>().value() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).collect::<CompensatedSum<f64>>().value() / (n - 1) as f64
    } else {
        0.0
    };
    Summary { n, mean, var, se: (var / n as f64).sqrt() }
}

/// Sample variance with its delta-method standard error
/// `sqrt((μ4 - σ⁴) / n)`.
pub fn variance_with_se(xs: &[f64]) -> (f64, f64) {
    let s = summarize(xs);
    let n = xs.len() as f64;
    let m4 = xs.iter().map(|x| (x - s.mean).powi(4)).collect::<CompensatedSum<f64>>().value() / n;
    (s.var, ((m4 - s.var * s.var).max(0.0) / n).sqrt())
}

/// Kolmogorov-Smirnov distance between the sample and the normal law with
/// the sample's own mean and standard deviation.
pub fn ks_fitted_normal(xs: &[f64]) -> f64 {
    let s = summarize(xs);
    if xs.len() < 2 || !(s.var > 0.0) {
        return f64::NAN;
    }
    let normal = Normal::new(s.mean, s.var.sqrt()).expect("positive sd");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Pearson statistic `Σ (o - e)² / e`.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> f64 {
    observed.iter().zip(expected).filter(|(_, e)| **e > 0.0).map(|(o, e)| (o - e) * (o - e) / e).sum()
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

pub fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

/// `|x_i - target|` strictly decreasing.
pub fn approaches(xs: &[f64], target: f64) -> bool {
    let gaps: Vec<f64> = xs.iter().map(|x| (x - target).abs()).collect();
    strictly_decreasing(&gaps)
}
