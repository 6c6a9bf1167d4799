use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use super::require_deaths;
use crate::error::{domain, Error, Result};
use crate::model::{DistVector, ModelParams};

/// Poisson tail mass past `l_cap` above which the unconditional sum is refused.
pub const UNCONDITIONAL_TAIL_LIMIT: f64 = 1e-10;

fn log_weight(k: usize, log_load: f64) -> f64 {
    k as f64 * log_load - 2.0 * ln_gamma(k as f64 + 1.0)
}

/// Weights `load^k / (k!)^2` for `k < len`, normalized.
fn truncated_law(len: usize, load: f64) -> Vec<f64> {
    let log_load = load.ln();
    let logs: Vec<f64> = (0..len).map(|k| log_weight(k, log_load)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Stationary out-degree law of node `n` given `l` live nodes: proportional
/// to `(lambda/mu)^k / (k!)^2` on `k = 0..l-n-1` and zero beyond, since only
/// the `l - n - 1` later nodes can be its clients.
pub fn steady_state_conditional(n: usize, l: usize, params: &ModelParams) -> Result<DistVector> {
    require_deaths(params)?;
    if n < 1 || n >= l {
        return Err(domain(format!("need 1 <= n < l, got n={n}, l={l}")));
    }
    DistVector::from_weights(0, &truncated_law(l - n, params.load()))
}

/// Limit of [`steady_state_conditional`] as `l - n` grows: weights
/// `(lambda/mu)^k / (k!)^2`, normalized by `I_0(2 sqrt(lambda/mu))`.
/// The support is cut where weights drop below `1e-20` of the largest.
pub fn steady_state_unbounded(params: &ModelParams) -> Result<DistVector> {
    require_deaths(params)?;
    let log_load = params.load().ln();
    let mode = params.load().sqrt().floor() as usize;
    let peak = log_weight(mode, log_load);
    let mut len = mode + 1;
    while log_weight(len, log_load) - peak > -46.0 {
        len += 1;
    }
    DistVector::from_weights(0, &truncated_law(len + 1, params.load()))
}

/// Unconditional stationary probability with its truncation bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnconditionalValue {
    pub value: f64,
    /// Poisson mass of populations beyond `l_cap`.
    pub tail_mass: f64,
    /// Set when the truncated sum was empty.
    pub truncated_to_zero: bool,
}

/// Stationary probability that node `n` serves `k` clients, mixing
/// [`steady_state_conditional`] over a Poisson(`lambda/mu`) population
/// conditioned on node `n` being present (population at least `n + 1`).
/// The mixture runs over `l = n+k+1 ..= l_cap`.
pub fn steady_state_unconditional(
    n: usize,
    k: usize,
    params: &ModelParams,
    l_cap: usize,
) -> Result<UnconditionalValue> {
    require_deaths(params)?;
    if n < 1 {
        return Err(domain("node rank must be at least 1"));
    }
    let load = params.load();
    let tail_mass = gamma_lr(l_cap as f64 + 1.0, load);
    if n + k + 1 > l_cap {
        return Ok(UnconditionalValue {
            value: 0.0,
            tail_mass,
            truncated_to_zero: true,
        });
    }
    if tail_mass > UNCONDITIONAL_TAIL_LIMIT {
        return Err(Error::Convergence(format!(
            "Poisson({load}) mass {tail_mass:e} beyond l_cap = {l_cap} exceeds {UNCONDITIONAL_TAIL_LIMIT:e}"
        )));
    }
    let present = gamma_lr(n as f64 + 1.0, load);
    let log_load = load.ln();
    let log_wk = log_weight(k, log_load);
    // running normalizer Z_l = sum_{m < l-n} load^m / (m!)^2
    let mut z: f64 = (0..=k).map(|m| log_weight(m, log_load).exp()).sum();
    let mut value = 0.0;
    for l in (n + k + 1)..=l_cap {
        if l > n + k + 1 {
            z += log_weight(l - n - 1, log_load).exp();
        }
        let log_pois = -load + l as f64 * log_load - ln_gamma(l as f64 + 1.0);
        value += (log_pois + log_wk).exp() / z;
    }
    Ok(UnconditionalValue {
        value: value / present,
        tail_mass,
        truncated_to_zero: false,
    })
}

/// Leading-order stationary extra work of the root, `sqrt(lambda / mu)`.
pub fn root_extra_work_mean(params: &ModelParams) -> Result<f64> {
    require_deaths(params)?;
    Ok(params.load().sqrt())
}
