//! Null distribution of RPD between independent Gaussian embeddings, and the
//! z-test for dependence built on it.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::embedding::gaussian_matrix;
use crate::error::{Error, Result};
use crate::numeric::Moments;
use crate::rpd::rpd_of_matrices;

/// Below this many replicates the estimate is flagged as unreliable.
pub const MIN_RECOMMENDED_REPLICATES: usize = 30;

/// Significance level of the reject decision.
pub const ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub n: usize,
    pub d_left: usize,
    pub d_right: usize,
    pub replicates: usize,
    pub mu: f64,
    /// Sample (N-1) standard deviation.
    pub sigma: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub seed: u64,
    /// Set when `replicates` is below [`MIN_RECOMMENDED_REPLICATES`].
    pub low_replicates: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

impl NullDistribution {
    /// Summarizes RPD draws collected in replicate order.
    pub fn from_samples(n: usize, d_left: usize, d_right: usize, seed: u64, samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Precondition(format!(
                "need at least 2 replicates, got {}",
                samples.len()
            )));
        }
        let m = Moments::of(&samples);
        Ok(NullDistribution {
            n,
            d_left,
            d_right,
            replicates: samples.len(),
            mu: m.mean,
            sigma: m.sample_std(),
            skewness: m.skewness(),
            excess_kurtosis: m.excess_kurtosis(),
            seed,
            low_replicates: samples.len() < MIN_RECOMMENDED_REPLICATES,
            samples: Some(samples),
        })
    }

    /// A null given only by its moments, e.g. a published reference value.
    pub fn from_moments(mu: f64, sigma: f64) -> Self {
        NullDistribution {
            n: 0,
            d_left: 0,
            d_right: 0,
            replicates: 0,
            mu,
            sigma,
            skewness: f64::NAN,
            excess_kurtosis: f64::NAN,
            seed: 0,
            low_replicates: true,
            samples: None,
        }
    }

    pub fn without_samples(mut self) -> Self {
        self.samples = None;
        self
    }

    /// One value per line, for external plotting.
    pub fn samples_text(&self) -> Option<String> {
        self.samples
            .as_ref()
            .map(|s| s.iter().map(|v| format!("{v:?}\n")).collect())
    }
}

/// Stream index for replicate `r`, side `side` (0 = left, 1 = right).
fn stream_id(replicate: usize, side: u64) -> u64 {
    (replicate as u64) << 1 | side
}

/// Monte Carlo estimate of the RPD null: `replicates` pairs of independent
/// `n x d` standard normal matrices, each drawn from its own ChaCha stream
/// derived from `(seed, replicate, side)`.
pub fn monte_carlo_null(
    n: usize,
    d_left: usize,
    d_right: usize,
    replicates: usize,
    seed: u64,
) -> Result<NullDistribution> {
    if d_left == 0 || d_right == 0 {
        return Err(Error::Precondition("dimensions must be positive".into()));
    }
    if n <= d_left.max(d_right) {
        return Err(Error::Precondition(format!(
            "null model needs n > max(d_left, d_right); n={n}, dims={d_left},{d_right}"
        )));
    }
    if replicates < 2 {
        return Err(Error::Precondition(format!(
            "need at least 2 replicates, got {replicates}"
        )));
    }
    let samples: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let left = gaussian_matrix(n, d_left, seed, stream_id(r, 0));
            let right = gaussian_matrix(n, d_right, seed, stream_id(r, 1));
            rpd_of_matrices(&left, &right, true)
        })
        .collect::<Result<_>>()?;
    NullDistribution::from_samples(n, d_left, d_right, seed, samples)
}

/// Leading-order mean of the null for equal dimensions: `1 - d/n`.
///
/// A first-order approximation for sanity checks; the Monte Carlo estimate
/// sits slightly above it (about `1 - d/(n + d + 1)`).
pub fn analytic_null_mean(n: usize, d: usize) -> Result<f64> {
    if d == 0 || n <= d {
        return Err(Error::Precondition(format!("need n > d >= 1, got n={n}, d={d}")));
    }
    Ok(1.0 - d as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    #[default]
    TwoSided,
    /// Alternative: observed RPD below the null mean (dependence).
    Lower,
    Upper,
}

impl FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" | "two_sided" => Ok(Tail::TwoSided),
            "lower" | "less" => Ok(Tail::Lower),
            "upper" | "greater" => Ok(Tail::Upper),
            other => Err(Error::Precondition(format!("unknown tail {other:?}"))),
        }
    }
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tail::TwoSided => "two-sided",
            Tail::Lower => "lower",
            Tail::Upper => "upper",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub z: f64,
    pub p_two_sided: f64,
    pub tail: Tail,
    /// p-value for `tail`.
    pub p_value: f64,
    pub reject_at_0_01: bool,
}

/// `z = (observed - mu) / sigma` with normal-tail p-values.
pub fn z_test(observed_rpd: f64, null: &NullDistribution, tail: Tail) -> Result<ZTest> {
    if !(null.sigma > 0.0) {
        return Err(Error::Degenerate(format!(
            "null standard deviation must be positive, got {}",
            null.sigma
        )));
    }
    let z = (observed_rpd - null.mu) / null.sigma;
    let p_two_sided = erfc(z.abs() / SQRT_2).min(1.0);
    let p_value = match tail {
        Tail::TwoSided => p_two_sided,
        Tail::Lower => 0.5 * erfc(-z / SQRT_2),
        Tail::Upper => 0.5 * erfc(z / SQRT_2),
    };
    Ok(ZTest {
        z,
        p_two_sided,
        tail,
        p_value,
        reject_at_0_01: p_value < ALPHA,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityDiagnostics {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub normal_plausible: bool,
}

pub const MIN_NORMALITY_SAMPLES: usize = 100;
const SKEW_LIMIT: f64 = 0.3;
const KURTOSIS_LIMIT: f64 = 0.6;

/// Moment check of the stored draws: plausible when `|skew| < 0.3` and
/// `|excess kurtosis| < 0.6`. Thresholds are sized for a few hundred draws.
pub fn normality_diagnostics(null: &NullDistribution) -> Result<NormalityDiagnostics> {
    let samples = null
        .samples
        .as_deref()
        .ok_or_else(|| Error::Precondition("null distribution has no stored samples".into()))?;
    if samples.len() < MIN_NORMALITY_SAMPLES {
        return Err(Error::Precondition(format!(
            "need at least {MIN_NORMALITY_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let m = Moments::of(samples);
    let skewness = m.skewness();
    let excess_kurtosis = m.excess_kurtosis();
    if !skewness.is_finite() || !excess_kurtosis.is_finite() {
        return Err(Error::Degenerate(
            "samples are constant; skewness is undefined".into(),
        ));
    }
    Ok(NormalityDiagnostics {
        skewness,
        excess_kurtosis,
        normal_plausible: skewness.abs() < SKEW_LIMIT && excess_kurtosis.abs() < KURTOSIS_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_mean_values() {
        assert!((analytic_null_mean(1000, 100).unwrap() - 0.9).abs() < 1e-15);
        assert!((analytic_null_mean(1000, 999).unwrap() - 1.0 / 1000.0).abs() < 1e-15);
        assert!((analytic_null_mean(25097, 300).unwrap() - 0.988_046_4).abs() < 1e-6);
        assert!(analytic_null_mean(10, 10).is_err());
        assert!(analytic_null_mean(10, 0).is_err());
    }

    #[test]
    fn z_test_reference_values() {
        let null = NullDistribution::from_moments(0.953, 0.001);
        let t = z_test(0.511, &null, Tail::TwoSided).unwrap();
        assert!((t.z.abs() - 442.0).abs() < 0.5);
        assert!(t.z < 0.0);
        assert!(t.p_two_sided < 1e-100);
        assert!(t.reject_at_0_01);
    }

    #[test]
    fn z_test_at_mean() {
        let null = NullDistribution::from_moments(0.9, 0.01);
        let t = z_test(0.9, &null, Tail::TwoSided).unwrap();
        assert_eq!(t.z, 0.0);
        assert!((t.p_two_sided - 1.0).abs() < 1e-15);
        assert!(!t.reject_at_0_01);
    }

    #[test]
    fn z_test_quantile() {
        let null = NullDistribution::from_moments(0.5, 0.02);
        let t = z_test(0.5 + 2.576 * 0.02, &null, Tail::TwoSided).unwrap();
        assert!((t.p_two_sided - 0.01).abs() < 1e-3);
        let lower = z_test(0.5 - 2.576 * 0.02, &null, Tail::Lower).unwrap();
        assert!((lower.p_value - 0.005).abs() < 1e-4);
        let upper = z_test(0.5 - 2.576 * 0.02, &null, Tail::Upper).unwrap();
        assert!((upper.p_value - 0.995).abs() < 1e-4);
    }

    #[test]
    fn z_test_is_affine() {
        let null = NullDistribution::from_moments(0.97, 0.0031);
        for obs in [0.1, 0.5, 0.97, 1.2] {
            let t = z_test(obs, &null, Tail::TwoSided).unwrap();
            assert!((t.z * null.sigma + null.mu - obs).abs() < 1e-12);
        }
    }

    #[test]
    fn z_test_zero_sigma() {
        let null = NullDistribution::from_moments(0.9, 0.0);
        assert!(matches!(z_test(0.5, &null, Tail::TwoSided), Err(Error::Degenerate(_))));
    }

    #[test]
    fn minimal_replicates_flagged() {
        let null = monte_carlo_null(20, 3, 3, 2, 5).unwrap();
        assert_eq!(null.replicates, 2);
        assert!(null.low_replicates);
        assert!(null.sigma >= 0.0);
    }

    #[test]
    fn invalid_sizes() {
        assert!(monte_carlo_null(10, 10, 3, 50, 0).is_err());
        assert!(monte_carlo_null(10, 3, 0, 50, 0).is_err());
        assert!(monte_carlo_null(10, 3, 3, 1, 0).is_err());
    }

    #[test]
    fn deterministic_and_consistent() {
        let a = monte_carlo_null(200, 10, 15, 40, 9).unwrap();
        let b = monte_carlo_null(200, 10, 15, 40, 9).unwrap();
        assert_eq!(a.mu.to_bits(), b.mu.to_bits());
        assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
        let s = a.samples.as_ref().unwrap();
        let m = Moments::of(s);
        assert!((m.mean - a.mu).abs() < 1e-12);
        assert!((m.sample_std() - a.sigma).abs() < 1e-12);
        assert!(a.mu < 1.0 + 1e-3);
        assert!(!a.low_replicates);
    }

    #[test]
    fn normality_preconditions() {
        let null = monte_carlo_null(50, 3, 3, 20, 1).unwrap();
        assert!(matches!(normality_diagnostics(&null), Err(Error::Precondition(_))));
        assert!(normality_diagnostics(&null.clone().without_samples()).is_err());
        let constant = NullDistribution::from_samples(10, 1, 1, 0, vec![0.5; 150]).unwrap();
        assert!(matches!(normality_diagnostics(&constant), Err(Error::Degenerate(_))));
    }

    #[test]
    fn skewed_samples_are_not_normal() {
        // deterministic exponential quantiles: skewness 2, excess kurtosis 6
        let k = 400;
        let samples: Vec<f64> = (0..k)
            .map(|i| -(1.0 - (i as f64 + 0.5) / k as f64).ln())
            .collect();
        let null = NullDistribution::from_samples(10, 1, 1, 0, samples).unwrap();
        let diag = normality_diagnostics(&null).unwrap();
        assert!(diag.skewness > 1.5, "{}", diag.skewness);
        assert!(!diag.normal_plausible);
    }

    #[test]
    fn normal_quantiles_are_plausible() {
        let k = 300;
        let samples: Vec<f64> = (0..k)
            .map(|i| {
                let p = (i as f64 + 0.5) / k as f64;
                // inverse of 0.5 * erfc(-x / sqrt 2) by bisection
                let (mut lo, mut hi) = (-10.0f64, 10.0f64);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if 0.5 * erfc(-mid / SQRT_2) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let null = NullDistribution::from_samples(10, 1, 1, 0, samples).unwrap();
        assert!(normality_diagnostics(&null).unwrap().normal_plausible);
    }

    #[test]
    fn json_round_trip() {
        let null = monte_carlo_null(30, 2, 2, 5, 3).unwrap();
        let text = serde_json::to_string(&null).unwrap();
        let back: NullDistribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, null);
        assert_eq!(null.samples_text().unwrap().lines().count(), 5);
    }
}
