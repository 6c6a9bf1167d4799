//! Shared domain types: model rates and truncated probability vectors.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Arrival rate `lambda` and per-node death rate `mu` of the overlay model.
///
/// The rate ratio root `alpha = sqrt(mu / lambda)` is always recomputed from
/// the two rates and never stored on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    lambda: f64,
    mu: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    lambda: f64,
    mu: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        validate_params(raw.lambda, raw.mu)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams { lambda: p.lambda, mu: p.mu }
    }
}

/// Checks the rates and builds [`ModelParams`].
pub fn validate_params(lambda: f64, mu: f64) -> Result<ModelParams> {
    if !lambda.is_finite() || !mu.is_finite() {
        return Err(domain(format!("rates must be finite (lambda={lambda}, mu={mu})")));
    }
    if lambda <= 0.0 {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    if mu < 0.0 {
        return Err(domain(format!("mu must be non-negative, got {mu}")));
    }
    Ok(ModelParams { lambda, mu })
}

impl ModelParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        validate_params(lambda, mu)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `sqrt(mu / lambda)`.
    pub fn alpha(&self) -> f64 {
        self.alpha_sq().sqrt()
    }

    /// `mu / lambda`, the squared rate ratio root.
    pub fn alpha_sq(&self) -> f64 {
        self.mu / self.lambda
    }

    /// `lambda / mu`, the stationary mean population. Infinite when `mu == 0`.
    pub fn load(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn has_deaths(&self) -> bool {
        self.mu > 0.0
    }
}

const MASS_TOL: f64 = 1e-12;

/// A finite probability vector over consecutive states starting at
/// `support_offset`. Mass not represented by `probs` (truncation) is recorded
/// in `mass_deficit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistVector {
    support_offset: usize,
    probs: Vec<f64>,
    mass_deficit: f64,
}

impl DistVector {
    /// Wraps explicit probabilities. Entries within `1e-12` of `[0, 1]` are
    /// clamped; anything further out is rejected, as is a total above one.
    pub fn new(support_offset: usize, probs: Vec<f64>) -> Result<Self> {
        let mut probs = probs;
        for (i, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -MASS_TOL || *p > 1.0 + MASS_TOL {
                return Err(domain(format!(
                    "probability at state {} is {p}",
                    support_offset + i
                )));
            }
            *p = p.clamp(0.0, 1.0);
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + MASS_TOL {
            return Err(domain(format!("probabilities sum to {total} > 1")));
        }
        Ok(DistVector {
            support_offset,
            probs,
            mass_deficit: 1.0 - total,
        })
    }

    /// Normalizes non-negative weights into a distribution with no deficit.
    pub fn from_weights(support_offset: usize, weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(domain("weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(domain("weights sum to zero"));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let sum: f64 = probs.iter().sum();
        Ok(DistVector {
            support_offset,
            probs,
            mass_deficit: 1.0 - sum,
        })
    }

    pub fn point_mass(state: usize) -> Self {
        DistVector {
            support_offset: state,
            probs: vec![1.0],
            mass_deficit: 0.0,
        }
    }

    pub fn support_offset(&self) -> usize {
        self.support_offset
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mass_deficit(&self) -> f64 {
        self.mass_deficit
    }

    /// Last represented state plus one.
    pub fn support_end(&self) -> usize {
        self.support_offset + self.probs.len()
    }

    /// Probability of `state`; zero outside the represented support.
    pub fn prob(&self, state: usize) -> f64 {
        state
            .checked_sub(self.support_offset)
            .and_then(|i| self.probs.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, p)| (self.support_offset + i, *p))
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, p)| k as f64 * p).sum()
    }
}
