//! The zero-mortality regime: transient and embedded out-degree laws, their
//! means and tail bounds, in-degree asymptotics and spanning-tree growth.
//!
//! Items whose names end in `_asymptotic` are leading-order approximations
//! and disagree with the exact law at small sizes. Exact counterparts live
//! next to them ([`arc_probabilities`], [`in_degree_mean_exact`]).

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dd::{Dd, DD_EPS};
use crate::error::{domain, Error, Result};
use crate::model::DistVector;

/// Absolute error above which an alternating-sum evaluation is refused.
pub const CANCELLATION_LIMIT: f64 = 1e-9;

/// Tolerated excursion of a raw alternating sum outside `[0, 1]`.
const RANGE_SLACK: f64 = 1e-9;

/// Largest `n_max` accepted by [`embedded_pmf_table`].
pub const EMBEDDED_TABLE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    Upper,
    Lower,
}

/// Sums signed double-double terms, then applies the cancellation guard.
fn guarded_sum(terms: impl Iterator<Item = Dd>, what: &str) -> Result<f64> {
    let mut sum = Dd::ZERO;
    let mut magnitude = 0.0;
    let mut count = 0usize;
    for t in terms {
        if !t.is_finite() {
            return Err(Error::Numeric(format!("{what}: term overflow")));
        }
        magnitude += t.abs().hi();
        sum = sum + t;
        count += 1;
    }
    let err_bound = magnitude * DD_EPS * (count as f64 + 1.0);
    if err_bound > CANCELLATION_LIMIT {
        return Err(Error::Numeric(format!(
            "{what}: cancellation error bound {err_bound:e} exceeds {CANCELLATION_LIMIT:e}"
        )));
    }
    let raw = sum.to_f64();
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&raw) {
        return Err(Error::Numeric(format!("{what}: raw value {raw:e} outside [0, 1]")));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// `j^k / k!` as a running product, which stays finite where `k!` would not.
fn power_over_factorial(j: u32, k: u32) -> Dd {
    (1..=k).fold(Dd::ONE, |acc, m| acc * f64::from(j) / f64::from(m))
}

/// Binomial coefficients `C(n, 0..=n)` by the multiplicative recurrence.
fn binomial_row(n: u32) -> Vec<Dd> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = Dd::ONE;
    row.push(c);
    for j in 1..=n {
        c = c * f64::from(n + 1 - j) / f64::from(j);
        row.push(c);
    }
    row
}

fn to_u32(k: usize, what: &str) -> Result<u32> {
    u32::try_from(k).map_err(|_| Error::Capacity(format!("{what} {k} too large")))
}

/// Transient law of the pure-birth out-degree process with rates
/// `lambda / (1 + k)`, started at zero:
///
/// `p(k,t) = (1/k!) sum_{j=1}^{k+1} (-1)^{k+1-j} j^k C(k+1,j) exp(-lambda t / j)`.
pub fn pure_birth_pmf(k: usize, t: f64, lambda: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(domain(format!("time must be finite and >= 0, got {t}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    let x = lambda * t;
    if k == 0 {
        return Ok((-x).exp());
    }
    let k = to_u32(k, "state")?;
    let binom = binomial_row(k + 1);
    let terms = (1..=k + 1).map(|j| {
        let e = (Dd::from(-x) / f64::from(j)).exp();
        let t = binom[j as usize] * power_over_factorial(j, k) * e;
        if (k + 1 - j) % 2 == 1 {
            -t
        } else {
            t
        }
    });
    guarded_sum(terms, "pure_birth_pmf")
}

/// Closed form of the embedded (per-arrival) chain law:
///
/// `p_{n,k} = (1/k!) sum_{i=1}^{k} (-1)^{k-i} C(k+1,i+1) i^k (i/(i+1))^{n-k}`.
pub fn embedded_pmf_closed(n: usize, k: usize) -> Result<f64> {
    if k < 1 || k > n {
        return Err(domain(format!("closed form needs n >= k >= 1, got n={n}, k={k}")));
    }
    let steps = to_u32(n - k, "step")?;
    let k = to_u32(k, "state")?;
    let binom = binomial_row(k + 1);
    let terms = (1..=k).map(|i| {
        let ratio = (Dd::from(f64::from(i)) / f64::from(i + 1)).powi(steps);
        let t = binom[i as usize + 1] * power_over_factorial(i, k) * ratio;
        if (k - i) % 2 == 1 {
            -t
        } else {
            t
        }
    });
    guarded_sum(terms, "embedded_pmf_closed")
}

/// Row-by-row generator of the embedded chain law: from state `k` the next
/// arrival is accepted with probability `1 / (1 + k)`.
#[derive(Debug, Clone)]
pub struct EmbeddedRows {
    current: Vec<f64>,
}

impl EmbeddedRows {
    pub fn new() -> Self {
        EmbeddedRows { current: vec![1.0] }
    }

    /// Row index of [`EmbeddedRows::row`].
    pub fn step(&self) -> usize {
        self.current.len() - 1
    }

    pub fn row(&self) -> &[f64] {
        &self.current
    }

    pub fn advance(&mut self) {
        let n = self.current.len();
        let mut next = vec![0.0; n + 1];
        for (k, &p) in self.current.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let up = 1.0 / (1.0 + k as f64);
            next[k + 1] += up * p;
            next[k] += (1.0 - up) * p;
        }
        self.current = next;
    }
}

impl Default for EmbeddedRows {
    fn default() -> Self {
        Self::new()
    }
}

/// Triangular table `rows[n][k] = p_{n,k}`, `0 <= k <= n <= n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPmfTable {
    rows: Vec<Vec<f64>>,
}

impl EmbeddedPmfTable {
    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    /// `p_{n,k}`, zero for `k > n`.
    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.rows[n].get(k).copied().unwrap_or(0.0)
    }

    pub fn distribution(&self, n: usize) -> DistVector {
        DistVector::new(0, self.rows[n].clone()).expect("recursion rows are probability vectors")
    }

    pub fn mean(&self, n: usize) -> f64 {
        self.rows[n].iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

pub fn embedded_pmf_table(n_max: usize) -> Result<EmbeddedPmfTable> {
    embedded_pmf_table_with_limit(n_max, EMBEDDED_TABLE_LIMIT)
}

pub fn embedded_pmf_table_with_limit(n_max: usize, limit: usize) -> Result<EmbeddedPmfTable> {
    if n_max > limit {
        return Err(Error::Capacity(format!(
            "embedded table n_max {n_max} exceeds limit {limit}"
        )));
    }
    let mut gen = EmbeddedRows::new();
    let mut rows = Vec::with_capacity(n_max + 1);
    rows.push(gen.row().to_vec());
    for _ in 0..n_max {
        gen.advance();
        rows.push(gen.row().to_vec());
    }
    Ok(EmbeddedPmfTable { rows })
}

/// Leading-order mean of the embedded chain, `(-1 + sqrt(1 + 8n)) / 2`.
/// Exceeds the exact mean at small `n` (exact `E(X_3) = 23/12`, formula 2).
pub fn mean_out_degree_asymptotic(n: usize) -> f64 {
    (-1.0 + (1.0 + 8.0 * n as f64).sqrt()) / 2.0
}

/// Chernoff-type bound `exp(-eps^2 E(X_n) / 3)` on either relative tail of
/// the embedded chain, with the mean taken from
/// [`mean_out_degree_asymptotic`].
pub fn out_degree_tail_bound(n: usize, epsilon: f64, side: TailSide) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if n < 1 {
        return Err(domain("n must be at least 1"));
    }
    let _ = side;
    Ok((-epsilon * epsilon * mean_out_degree_asymptotic(n) / 3.0).exp())
}

/// Leading-order mean in-degree of the node arriving after `n` others,
/// `(2 sqrt 2 / 3) sqrt n`.
pub fn in_degree_mean_asymptotic(n: usize) -> f64 {
    2.0 * std::f64::consts::SQRT_2 / 3.0 * (n as f64).sqrt()
}

/// Leading-order probability that node `i` accepts node `n_plus_1`,
/// `1 / sqrt(2(n - i) + 1)`.
pub fn arc_probability_asymptotic(i: usize, n_plus_1: usize) -> Result<f64> {
    if i == 0 || i >= n_plus_1 {
        return Err(domain(format!(
            "server rank must satisfy 1 <= i <= n, got i={i}, n+1={n_plus_1}"
        )));
    }
    let gap = (n_plus_1 - 1 - i) as f64;
    Ok(1.0 / (2.0 * gap + 1.0).sqrt())
}

/// Self-bounding deviation bound on the in-degree of node `i`: upper tail
/// `exp(-eps^2 E / 4)`, lower tail `exp(-3 eps^2 E / 8)` with
/// `E = in_degree_mean_asymptotic(i - 1)`.
pub fn in_degree_tail_bound(i: usize, epsilon: f64, side: TailSide) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if i < 2 {
        return Err(domain(format!("node rank must be at least 2, got {i}")));
    }
    let mean = in_degree_mean_asymptotic(i - 1);
    let e2 = epsilon * epsilon;
    Ok(match side {
        TailSide::Upper => (-e2 * mean / 4.0).exp(),
        TailSide::Lower => (-3.0 * e2 * mean / 8.0).exp(),
    })
}

/// Natural log of the leading-order expected spanning-tree count,
/// `(n/2) ln(8/9) + ln(n!) / 2`.
pub fn expected_spanning_trees_log(n: usize) -> f64 {
    let n = n as f64;
    n / 2.0 * (8.0f64 / 9.0).ln() + 0.5 * ln_gamma(n + 1.0)
}

/// Exact acceptance probabilities `theta[m] = E[1 / (1 + X_m)]`: the chance
/// that a node which has already seen `m` later arrivals accepts the next one.
pub fn arc_probabilities(m_max: usize) -> Vec<f64> {
    let mut gen = EmbeddedRows::new();
    let mut out = Vec::with_capacity(m_max + 1);
    loop {
        let theta = gen
            .row()
            .iter()
            .enumerate()
            .map(|(k, p)| p / (1.0 + k as f64))
            .sum();
        out.push(theta);
        if gen.step() == m_max {
            return out;
        }
        gen.advance();
    }
}

/// Exact mean in-degree of the node arriving after `n` others.
pub fn in_degree_mean_exact(n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    arc_probabilities(n - 1).iter().sum()
}

/// Exact in-degree law of the node arriving after `n` others: a sum of
/// independent Bernoulli variables with success probabilities
/// `theta[0..n]`.
pub fn in_degree_distribution(n: usize) -> DistVector {
    if n == 0 {
        return DistVector::point_mass(0);
    }
    let theta = arc_probabilities(n - 1);
    let mut pmf = vec![1.0];
    for &q in &theta {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &p) in pmf.iter().enumerate() {
            next[k] += p * (1.0 - q);
            next[k + 1] += p * q;
        }
        pmf = next;
    }
    DistVector::new(0, pmf).expect("convolution of Bernoulli laws")
}
