//! Taylor-series transient solution
//! `p(k,t) = 1 / (alpha^{2k} k!) * sum_i (lambda t)^i / i! * S^(k)_i`.
//!
//! Coefficients satisfy
//! `S^(k+1)_i = S^(k)_{i+1} + b_k S^(k)_i - alpha^2 S^(k-1)_i` with
//! `b_k = 1/(k+1) + k alpha^2`, `S^(-1)_i = 0` and `S^(k)_i = 0` for `k > i`.
//! Rearranged for `S^(k)_{i+1}`, each column `i + 1` follows from column `i`
//! alone, starting at `S^(0)_0 = 1`.

use serde::{Deserialize, Serialize};

use super::require_deaths;
use crate::dd::{Dd, DD_EPS};
use crate::error::{domain, Error, Result};
use crate::model::{DistVector, ModelParams};

/// Largest Taylor order accepted by [`build_s_table`].
pub const S_TABLE_LIMIT: usize = 4096;

/// Increments below `tol * QUIESCENCE_FACTOR` count towards the stopping rule.
const QUIESCENCE_FACTOR: f64 = 1e-3;
const QUIESCENT_RUN: usize = 30;
const INITIAL_ORDER: usize = 64;

/// Triangular coefficient table `S^(k)_i`, `0 <= k <= i <= order`.
///
/// Stored as `S^(k)_i / i!`, which stays finite far past the order where
/// `S^(k)_i` itself overflows.
#[derive(Debug, Clone)]
pub struct STable {
    alpha_sq: f64,
    coeffs: Vec<Vec<Dd>>,
    // same recursion on absolute values; bounds accumulated rounding
    magnitude: Vec<Vec<f64>>,
}

fn b_coeff(k: usize, alpha_sq: f64) -> Dd {
    Dd::ONE / (k as f64 + 1.0) + Dd::from(alpha_sq) * k as f64
}

impl STable {
    fn seed(alpha_sq: f64) -> Self {
        STable {
            alpha_sq,
            coeffs: vec![vec![Dd::ONE]],
            magnitude: vec![vec![1.0]],
        }
    }

    fn extend_to(&mut self, order: usize) {
        let a2 = self.alpha_sq;
        while self.order() < order {
            let i = self.order();
            let col = &self.coeffs[i];
            let mag = &self.magnitude[i];
            let at = |v: &Vec<Dd>, k: isize| -> Dd {
                if k < 0 || k as usize > i {
                    Dd::ZERO
                } else {
                    v[k as usize]
                }
            };
            let at_mag = |k: isize| -> f64 {
                if k < 0 || k as usize > i {
                    0.0
                } else {
                    mag[k as usize]
                }
            };
            let mut next = Vec::with_capacity(i + 2);
            let mut next_mag = Vec::with_capacity(i + 2);
            for k in 0..=(i + 1) {
                let ki = k as isize;
                let b = b_coeff(k, a2);
                let scale = (i + 1) as f64;
                next.push((at(col, ki + 1) - b * at(col, ki) + at(col, ki - 1) * a2) / scale);
                next_mag.push(
                    (at_mag(ki + 1) + b.to_f64() * at_mag(ki) + a2 * at_mag(ki - 1)) / scale,
                );
            }
            self.coeffs.push(next);
            self.magnitude.push(next_mag);
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_sq.sqrt()
    }

    /// Largest Taylor index `I` held by the table.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `S^(k)_i`, zero for `k > i`. Overflows to infinity for large `i`.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        let factorial = (1..=i).fold(1.0, |acc, j| acc * j as f64);
        self.coeffs[i].get(k).map_or(0.0, |c| c.to_f64() * factorial)
    }

    /// Largest residual of the defining recursion, relative to
    /// `max(1, |S^(k)_{i+1}|)` and to the rounding magnitude of the cell, over
    /// every cell whose coefficients are finite in `f64`.
    pub fn recursion_residual(&self) -> f64 {
        let a2 = self.alpha_sq;
        let mut worst: f64 = 0.0;
        let mut factorial = 1.0;
        for i in 0..self.order() {
            factorial *= (i + 1) as f64;
            if !factorial.is_finite() {
                break;
            }
            for k in 0..=(i + 1) {
                let lhs = self.get(i, k + 1);
                let below = if k == 0 { 0.0 } else { self.get(i, k - 1) };
                let next = self.get(i + 1, k);
                let rhs = next + b_coeff(k, a2).to_f64() * self.get(i, k) - a2 * below;
                let scale = 1f64.max(next.abs()).max(self.magnitude[i + 1][k] * factorial);
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
        worst
    }
}

pub fn build_s_table(params: &ModelParams, order: usize) -> Result<STable> {
    build_s_table_with_limit(params, order, S_TABLE_LIMIT)
}

pub fn build_s_table_with_limit(params: &ModelParams, order: usize, limit: usize) -> Result<STable> {
    require_deaths(params)?;
    if order > limit {
        return Err(Error::Capacity(format!("Taylor order {order} exceeds limit {limit}")));
    }
    let mut table = STable::seed(params.alpha_sq());
    table.extend_to(order);
    Ok(table)
}

/// Truncation controls for the series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Normalization window half-width; must lie in `(0, 1e-3)`.
    pub tol: f64,
    /// Order cap before giving up with a convergence error.
    pub max_order: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            tol: 1e-9,
            max_order: 1024,
        }
    }
}

/// Transient law at one time, with the order the stopping rule fired at.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientSolution {
    pub dist: DistVector,
    pub order: usize,
    /// Raw truncated sum over every evaluated state, before any rescaling.
    pub raw_total: f64,
    /// Rounding error bound of the worst reported state.
    pub error_bound: f64,
}

struct Evaluated {
    probs: Vec<f64>,
    quiescent: Vec<bool>,
    error_bound: Vec<f64>,
}

fn evaluate(table: &STable, x: f64, threshold: f64) -> Result<Evaluated> {
    let order = table.order();
    let a2 = table.alpha_sq;
    // coefficients carry the 1/i!, so the weights are plain powers
    let mut weights = Vec::with_capacity(order + 1);
    let mut w = Dd::ONE;
    weights.push(w);
    for _ in 1..=order {
        w = w * x;
        weights.push(w);
    }
    let mut probs = Vec::with_capacity(order + 1);
    let mut quiescent = Vec::with_capacity(order + 1);
    let mut error_bound = Vec::with_capacity(order + 1);
    let mut prefactor = Dd::ONE;
    for k in 0..=order {
        if k > 0 {
            prefactor = prefactor / (a2 * k as f64);
        }
        let pf = prefactor.to_f64();
        if !pf.is_finite() {
            return Err(Error::Numeric(format!(
                "prefactor 1/(alpha^2k k!) overflows at k = {k}"
            )));
        }
        let mut sum = Dd::ZERO;
        let mut mag = 0.0;
        let mut run = 0usize;
        for (i, &w) in weights.iter().enumerate().take(order + 1).skip(k) {
            let inc = table.coeffs[i][k] * w;
            if !inc.is_finite() || !table.magnitude[i][k].is_finite() {
                return Err(Error::Numeric(format!(
                    "series coefficient overflow at i = {i}, k = {k}"
                )));
            }
            sum = sum + inc;
            mag += w.to_f64() * table.magnitude[i][k] * (i as f64 + 2.0);
            if (inc * pf).to_f64().abs() < threshold {
                run += 1;
            } else {
                run = 0;
            }
        }
        let value = (sum * prefactor).to_f64();
        probs.push(value);
        quiescent.push(run >= QUIESCENT_RUN);
        error_bound.push(pf * mag * DD_EPS);
    }
    Ok(Evaluated {
        probs,
        quiescent,
        error_bound,
    })
}

/// Transient out-degree law at time `t` for every state the series resolves.
///
/// The order doubles until the last 30 increments of each reported state fall
/// below `tol * 1e-3` and the total over all evaluated states lies within
/// `tol` of one. States `0..=order - 30` are reported; entries are clamped to
/// `[0, 1]` and rescaled if their sum exceeds one.
pub fn bd_transient_distribution(
    t: f64,
    params: &ModelParams,
    opts: SeriesOptions,
) -> Result<TransientSolution> {
    require_deaths(params)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(domain(format!("time must be finite and >= 0, got {t}")));
    }
    if !(opts.tol > 0.0 && opts.tol < 1e-3) {
        return Err(domain(format!("tol must lie in (0, 1e-3), got {}", opts.tol)));
    }
    let x = params.lambda() * t;
    let threshold = opts.tol * QUIESCENCE_FACTOR;
    let mut table = STable::seed(params.alpha_sq());
    let mut order = INITIAL_ORDER.min(opts.max_order.max(QUIESCENT_RUN));
    loop {
        table.extend_to(order);
        let ev = evaluate(&table, x, threshold)?;
        let reported = order + 1 - QUIESCENT_RUN;
        let total: f64 = ev.probs.iter().sum();
        let settled = ev.quiescent[..reported].iter().all(|&q| q);
        if settled && (total - 1.0).abs() <= opts.tol {
            let worst = ev.error_bound[..reported].iter().cloned().fold(0.0, f64::max);
            if worst > threshold {
                return Err(Error::Numeric(format!(
                    "series rounding bound {worst:e} exceeds {threshold:e} at lambda t = {x}"
                )));
            }
            let mut probs = ev.probs[..reported].to_vec();
            for p in probs.iter_mut() {
                if *p < -opts.tol || *p > 1.0 + opts.tol {
                    return Err(Error::Numeric(format!("series value {p:e} outside [0, 1]")));
                }
                *p = p.clamp(0.0, 1.0);
            }
            let kept: f64 = probs.iter().sum();
            if kept > 1.0 {
                probs.iter_mut().for_each(|p| *p /= kept);
            }
            let dist = DistVector::new(0, probs)?;
            return Ok(TransientSolution {
                dist,
                order,
                raw_total: total,
                error_bound: worst,
            });
        }
        if order >= opts.max_order {
            return Err(Error::Convergence(format!(
                "series did not settle by order {order} at lambda t = {x} (total {total:e})"
            )));
        }
        order = (order * 2).min(opts.max_order);
    }
}

/// `p(k, t)` of the discouragement queue started empty.
pub fn bd_transient_pmf(k: usize, t: f64, params: &ModelParams, tol: f64) -> Result<f64> {
    let opts = SeriesOptions {
        tol,
        ..SeriesOptions::default()
    };
    let sol = bd_transient_distribution(t, params, opts)?;
    if k < sol.dist.support_end() {
        return Ok(sol.dist.prob(k));
    }
    // the state lies past the resolved range; its mass is inside the window
    Ok(0.0)
}
