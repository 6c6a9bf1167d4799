//! Empirical-versus-model comparison: total variation distance, Wilson
//! intervals for tail frequencies, normal intervals for means.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::DistVector;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Non-negative (possibly time-weighted) counts per state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDist {
    counts: Vec<f64>,
    size: f64,
}

impl EmpiricalDist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: Vec<f64>) -> Result<Self> {
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(domain("counts must be finite and non-negative"));
        }
        let size = counts.iter().sum();
        Ok(EmpiricalDist { counts, size })
    }

    pub fn from_samples<I: IntoIterator<Item = usize>>(samples: I) -> Self {
        let mut d = EmpiricalDist::new();
        for s in samples {
            d.add(s, 1.0);
        }
        d
    }

    pub fn add(&mut self, state: usize, weight: f64) {
        if state >= self.counts.len() {
            self.counts.resize(state + 1, 0.0);
        }
        self.counts[state] += weight;
        self.size += weight;
    }

    pub fn merge(&mut self, other: &EmpiricalDist) {
        for (k, &c) in other.counts.iter().enumerate() {
            self.add(k, c);
        }
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn size(&self) -> f64 {
        self.size
    }

    pub fn freq(&self, state: usize) -> f64 {
        self.counts.get(state).map_or(0.0, |c| c / self.size)
    }

    pub fn mean(&self) -> f64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(k, c)| k as f64 * c)
            .sum::<f64>()
            / self.size
    }

    pub fn to_dist_vector(&self) -> Result<DistVector> {
        DistVector::from_weights(0, &self.counts)
    }
}

/// `(1/2) sum_k |emp(k) - model(k)|` over the union of both supports.
pub fn tv_distance(emp: &EmpiricalDist, model: &DistVector) -> Result<f64> {
    if emp.size <= 0.0 {
        return Err(domain("empirical distribution has zero sample size"));
    }
    let end = emp.counts.len().max(model.support_end());
    let l1: f64 = (0..end).map(|k| (emp.freq(k) - model.prob(k)).abs()).sum();
    Ok((0.5 * l1).min(1.0))
}

/// Total variation distance between two model vectors.
pub fn tv_distance_models(a: &DistVector, b: &DistVector) -> f64 {
    let start = a.support_offset().min(b.support_offset());
    let end = a.support_end().max(b.support_end());
    let l1: f64 = (start..end).map(|k| (a.prob(k) - b.prob(k)).abs()).sum();
    (0.5 * l1).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub freq: f64,
    pub hits: u64,
    pub n: u64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl TailEstimate {
    /// Half-width of the Wilson interval in standard-error units.
    pub fn std_error(&self) -> f64 {
        (self.wilson_high - self.wilson_low) / (2.0 * Z95)
    }
}

/// 95% Wilson score interval for `hits` successes in `n` trials.
pub fn wilson_interval(hits: u64, n: u64) -> (f64, f64) {
    let n_f = n as f64;
    let p = hits as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Frequency of samples at or above `threshold`, with its Wilson interval.
pub fn tail_exceedance(samples: &[f64], threshold: f64) -> Result<TailEstimate> {
    let hits = samples.iter().filter(|&&s| s >= threshold).count() as u64;
    tail_from_counts(hits, samples.len() as u64)
}

pub fn tail_from_counts(hits: u64, n: u64) -> Result<TailEstimate> {
    if n == 0 {
        return Err(domain("tail frequency needs at least one sample"));
    }
    let (wilson_low, wilson_high) = wilson_interval(hits, n);
    Ok(TailEstimate {
        freq: hits as f64 / n as f64,
        hits,
        n,
        wilson_low,
        wilson_high,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub std_error: f64,
    pub low: f64,
    pub high: f64,
}

impl MeanCi {
    pub fn half_width(&self) -> f64 {
        (self.high - self.low) / 2.0
    }
}

/// Sample mean with a normal 95% interval `mean +- 1.96 s / sqrt(n)`.
pub fn mean_ci(samples: &[f64]) -> Result<MeanCi> {
    let n = samples.len();
    if n < 2 {
        return Err(domain(format!("mean interval needs at least 2 samples, got {n}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std_error = (var / n as f64).sqrt();
    Ok(MeanCi {
        mean,
        std_error,
        low: mean - Z95 * std_error,
        high: mean + Z95 * std_error,
    })
}
