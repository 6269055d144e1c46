//! Weak-error estimates, convergence-rate fits and distribution tests.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Normal, Poisson};

use crate::error::{Error, Result};

pub const DEFAULT_LEVEL: f64 = 0.99;

/// `|mean A - mean B|` with a two-sided interval at the given level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakError {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Signed `mean A - mean B`.
    pub difference: f64,
    pub std_error: f64,
    pub n_a: usize,
    pub n_b: usize,
}

impl WeakError {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interval {
    Normal,
    /// Percentile bootstrap of the absolute mean difference.
    Bootstrap { resamples: usize, seed: u64 },
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let ss = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

pub fn normal_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + 0.5 * level)
}

/// Normal-approximation weak error at level 0.99.
pub fn weak_error(a: &[f64], b: &[f64]) -> Result<WeakError> {
    weak_error_with(a, b, DEFAULT_LEVEL, Interval::Normal)
}

pub fn weak_error_with(a: &[f64], b: &[f64], level: f64, interval: Interval) -> Result<WeakError> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let diff = ma - mb;
    let se = (va / a.len() as f64 + vb / b.len() as f64).sqrt();
    let est = diff.abs();
    let (lo, hi) = match interval {
        Interval::Normal => {
            let z = normal_quantile(level);
            ((est - z * se).max(0.0), est + z * se)
        }
        Interval::Bootstrap { resamples, seed } => {
            let mut rng = crate::rng::RngStream::new(seed, 0);
            let mut stats: Vec<f64> = (0..resamples.max(1))
                .map(|_| {
                    let ra = (0..a.len()).map(|_| a[rng.random_range(0..a.len())]).sum::<f64>() / a.len() as f64;
                    let rb = (0..b.len()).map(|_| b[rng.random_range(0..b.len())]).sum::<f64>() / b.len() as f64;
                    (ra - rb).abs()
                })
                .collect();
            stats.sort_by(f64::total_cmp);
            let q = |p: f64| stats[((p * (stats.len() - 1) as f64).round() as usize).min(stats.len() - 1)];
            let alpha = 1.0 - level;
            (q(0.5 * alpha).min(est), q(1.0 - 0.5 * alpha).max(est))
        }
    };
    Ok(WeakError { estimate: est, ci_low: lo, ci_high: hi, difference: diff, std_error: se, n_a: a.len(), n_b: b.len() })
}

/// Weak error of coupled samples: `a[i]` and `b[i]` come from the same
/// replica, and the standard error is that of the differences `a[i] - b[i]`.
pub fn weak_error_paired(a: &[f64], b: &[f64], level: f64, interval: Interval) -> Result<WeakError> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!("paired samples differ in length: {} and {}", a.len(), b.len())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (diff, var) = mean_var(&d);
    let se = (var / d.len() as f64).sqrt();
    let est = diff.abs();
    let (lo, hi) = match interval {
        Interval::Normal => {
            let z = normal_quantile(level);
            ((est - z * se).max(0.0), est + z * se)
        }
        Interval::Bootstrap { resamples, seed } => {
            let mut rng = crate::rng::RngStream::new(seed, 0);
            let mut stats: Vec<f64> = (0..resamples.max(1))
                .map(|_| ((0..d.len()).map(|_| d[rng.random_range(0..d.len())]).sum::<f64>() / d.len() as f64).abs())
                .collect();
            stats.sort_by(f64::total_cmp);
            let q = |p: f64| stats[((p * (stats.len() - 1) as f64).round() as usize).min(stats.len() - 1)];
            let alpha = 1.0 - level;
            (q(0.5 * alpha).min(est), q(1.0 - 0.5 * alpha).max(est))
        }
    };
    Ok(WeakError { estimate: est, ci_low: lo, ci_high: hi, difference: diff, std_error: se, n_a: a.len(), n_b: b.len() })
}

/// Least-squares fit of `ln error = intercept + slope ln param`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    pub r_squared: f64,
}

pub fn fit_rate(params: &[f64], errors: &[f64]) -> Result<RateFit> {
    if params.len() != errors.len() {
        return Err(Error::InvalidArgument("parameter and error arrays differ in length".into()));
    }
    if params.len() < 3 {
        return Err(Error::DegenerateFit("at least three points are needed"));
    }
    if params.iter().chain(errors).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("rate fit needs positive finite inputs".into()));
    }
    let x: Vec<f64> = params.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= f64::EPSILON * n * (1.0 + mx * mx) {
        return Err(Error::DegenerateFit("parameters are not distinct"));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let std_error = if x.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(RateFit { slope, intercept, std_error, r_squared })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: Option<usize>,
}

/// Asymptotic Kolmogorov survival function `Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    if lambda < 1.18 {
        // small-lambda form: sqrt(2 pi)/lambda sum e^{-(2k-1)^2 pi^2 / (8 lambda^2)}
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let v = xa[i].min(xb[j]);
        while i < na && xa[i] <= v {
            i += 1;
        }
        while j < nb && xb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(TestReport { statistic: d, p_value: kolmogorov_survival(lambda), degrees_of_freedom: None })
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(a: &[f64], cdf: F) -> Result<TestReport> {
    if a.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut x = a.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x.iter().enumerate().fold(0.0f64, |d, (i, &v)| {
        let f = cdf(v);
        d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs())
    });
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    Ok(TestReport { statistic: d, p_value: kolmogorov_survival(lambda), degrees_of_freedom: None })
}

/// Pearson chi-square on binned counts against expected counts, pooling
/// adjacent bins until each expectation is at least 5.
pub fn chi_square(observed: &[f64], expected: &[f64], fitted_params: usize) -> Result<TestReport> {
    if observed.is_empty() || observed.len() != expected.len() {
        return Err(Error::EmptySample);
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        acc.0 += o;
        acc.1 += e;
        if acc.1 >= 5.0 {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => pooled.push(acc),
        }
    }
    if pooled.len() < 2 + fitted_params {
        return Err(Error::InvalidArgument("too few bins after pooling".into()));
    }
    let stat: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = pooled.len() - 1 - fitted_params;
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(TestReport { statistic: stat, p_value: dist.sf(stat), degrees_of_freedom: Some(df) })
}

/// Chi-square goodness of fit of integer counts to `Poisson(lambda)`.
pub fn chi_square_poisson(counts: &[u64], lambda: f64) -> Result<TestReport> {
    if counts.is_empty() {
        return Err(Error::EmptySample);
    }
    let dist = Poisson::new(lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n = counts.len() as f64;
    let kmax = *counts.iter().max().unwrap_or(&0);
    let top = kmax.max((lambda + 10.0 * lambda.sqrt() + 10.0) as u64);
    let mut observed = vec![0.0; top as usize + 1];
    for &c in counts {
        observed[c as usize] += 1.0;
    }
    let mut expected: Vec<f64> = (0..=top).map(|k| n * dist.pmf(k)).collect();
    // fold the upper tail into the last bin
    *expected.last_mut().expect("nonempty") += n * dist.sf(top);
    chi_square(&observed, &expected, 0)
}

/// Weak errors over a parameter sweep and the fitted log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorReport {
    pub parameter: String,
    pub values: Vec<f64>,
    pub errors: Vec<WeakError>,
    pub level: f64,
    pub fit: Option<RateFit>,
}

impl WeakErrorReport {
    pub fn new(parameter: &str, values: Vec<f64>, errors: Vec<WeakError>, level: f64) -> Self {
        let est: Vec<f64> = errors.iter().map(|e| e.estimate).collect();
        let fit = fit_rate(&values, &est).ok();
        Self { parameter: parameter.to_string(), values, errors, level, fit }
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.errors.iter().map(|e| e.estimate).collect()
    }

    /// `parameter, error, ci_low, ci_high, n_paths, fitted_rate`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{},error,ci_low,ci_high,n_paths,fitted_rate", self.parameter)?;
        let rate = self.fit.map(|f| f.slope.to_string()).unwrap_or_default();
        for (v, e) in self.values.iter().zip(&self.errors) {
            writeln!(w, "{v},{},{},{},{},{rate}", e.estimate, e.ci_low, e.ci_high, e.n_a.min(e.n_b))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.5];
        let w = weak_error(&a, &a).unwrap();
        assert_eq!(w.estimate, 0.0);
        assert!(w.ci_low <= 0.0 && w.ci_high >= 0.0);
        let ks = ks_two_sample(&a, &a).unwrap();
        assert_eq!(ks.statistic, 0.0);
        assert_eq!(ks.p_value, 1.0);
    }

    #[test]
    fn constant_samples() {
        let w = weak_error(&[1.0; 10], &[0.0; 7]).unwrap();
        assert_eq!(w.estimate, 1.0);
        assert_eq!(w.ci_high - w.ci_low, 0.0);
        assert_eq!(weak_error(&[], &[1.0]), Err(Error::EmptySample));
    }

    #[test]
    fn symmetric() {
        let a = [0.1, 0.5, 0.9];
        let b = [0.2, 0.2, 0.4, 0.8];
        let x = weak_error(&a, &b).unwrap();
        let y = weak_error(&b, &a).unwrap();
        assert_eq!(x.estimate, y.estimate);
        assert_eq!(x.ci_high, y.ci_high);
    }

    #[test]
    fn exact_power_law_fit() {
        let p = [0.02, 0.01, 0.005, 0.0025];
        let e: Vec<f64> = p.iter().map(|v: &f64| 3.0 * v.sqrt()).collect();
        let f = fit_rate(&p, &e).unwrap();
        assert_relative_eq!(f.slope, 0.5, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        let f = fit_rate(&p, &[2.0; 4]).unwrap();
        assert_relative_eq!(f.slope, 0.0, epsilon = 1e-12);
        assert_eq!(fit_rate(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::DegenerateFit("parameters are not distinct")));
    }

    #[test]
    fn kolmogorov_branches_agree() {
        for l in [0.9, 1.0, 1.1, 1.18, 1.25] {
            let mut s = 0.0;
            for k in 1..=100 {
                let term = (-2.0 * (k * k) as f64 * l * l).exp();
                s += if k % 2 == 1 { term } else { -term };
            }
            assert_relative_eq!(kolmogorov_survival(l), 2.0 * s, epsilon = 1e-12);
        }
        // classic critical value at 1%
        assert_relative_eq!(kolmogorov_survival(1.6276), 0.01, epsilon = 1e-4);
    }

    #[test]
    fn chi_square_exact_counts_pass() {
        let lambda = 3.0;
        let dist = Poisson::new(lambda).unwrap();
        let mut counts = Vec::new();
        for k in 0..15u64 {
            let n = (10000.0 * dist.pmf(k)).round() as usize;
            counts.extend(std::iter::repeat_n(k, n));
        }
        let r = chi_square_poisson(&counts, lambda).unwrap();
        assert!(r.p_value > 0.99, "{r:?}");
    }
}
