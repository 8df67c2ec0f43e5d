//! Confidence intervals and a Kolmogorov–Smirnov test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::StatsError;

/// Two-sided confidence level equivalent to ±3 standard deviations.
pub const THREE_SIGMA: f64 = 0.997_300_203_936_739_8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

/// Standard normal quantile for a two-sided confidence level.
pub fn z_for_confidence(confidence: f64) -> Result<f64, StatsError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::BadConfidence(confidence));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - (1.0 - confidence) / 2.0))
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<Interval, StatsError> {
    let z = z_for_confidence(confidence)?;
    wilson_interval_z(successes, trials, z)
}

pub fn wilson_interval_z(successes: u64, trials: u64, z: f64) -> Result<Interval, StatsError> {
    if trials == 0 || successes > trials {
        return Err(StatsError::InvalidCounts { successes, trials });
    }
    Ok(wilson_score(successes as f64 / trials as f64, trials as f64, z))
}

/// Wilson score interval for a proportion `p` with (effective) sample size
/// `n > 0`. Contains `p`; `lo = 0` iff `p = 0` and `hi = 1` iff `p = 1`.
pub fn wilson_score(p: f64, n: f64, z: f64) -> Interval {
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if p == 0.0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if p == 1.0 { 1.0 } else { (center + half).clamp(p, 1.0) };
    Interval { lo, hi }
}

/// Percentile interval of bootstrap replicates; `None` when there are none.
pub fn percentile_interval(samples: &mut [f64], confidence: f64) -> Option<Interval> {
    if samples.is_empty() {
        return None;
    }
    samples.sort_unstable_by(f64::total_cmp);
    let alpha = (1.0 - confidence) / 2.0;
    let pick = |q: f64| {
        let pos = q * (samples.len() - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let j = (i + 1).min(samples.len() - 1);
        samples[i] + frac * (samples[j] - samples[i])
    };
    Some(Interval { lo: pick(alpha), hi: pick(1.0 - alpha) })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (sample standard deviation / sqrt(n)).
pub fn std_err(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample KS test of `samples` against Exp(rate).
pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<KsResult, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptyBatch);
    }
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        d = d.max((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_survival(lambda), n: xs.len() })
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
