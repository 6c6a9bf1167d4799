use serde::{Deserialize, Serialize};

use super::require_deaths;
use crate::error::{Error, Result};
use crate::model::{DistVector, ModelParams};

/// Largest allowed gap between the recursion and the `d_k T^(h)_k` form.
pub const EMBEDDED_AGREEMENT_TOL: f64 = 1e-10;

/// Jump-chain law of the discouragement queue, `rows[n][k] = p_{n,k}` after
/// `n` transitions. From state `j` the chain moves up with probability
/// `1 / (1 + j(j+1) alpha^2)` and down otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdEmbeddedTable {
    pub alpha: f64,
    pub n_max: usize,
    pub rows: Vec<Vec<f64>>,
    /// `d_k = prod_{i=0}^{k} 1 / (1 + i(i-1) alpha^2)`.
    pub d: Vec<f64>,
    /// `t_layers[h][k] = T^(h)_k`.
    pub t_layers: Vec<Vec<f64>>,
    /// Cells where the product form was finite and compared.
    pub verified_cells: usize,
}

impl BdEmbeddedTable {
    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.rows[n].get(k).copied().unwrap_or(0.0)
    }

    pub fn distribution(&self, n: usize) -> DistVector {
        DistVector::new(0, self.rows[n].clone()).expect("recursion rows are probability vectors")
    }

    /// Product form `d_k T^((n-k)/2)_k`; zero when `n + k` is odd or `k > n`.
    pub fn closed_form(&self, n: usize, k: usize) -> f64 {
        if k > n || (n + k) % 2 == 1 {
            return 0.0;
        }
        self.d[k] * self.t_layers[(n - k) / 2][k]
    }
}

fn up_probability(j: usize, alpha_sq: f64) -> f64 {
    let j = j as f64;
    1.0 / (1.0 + j * (j + 1.0) * alpha_sq)
}

pub fn bd_embedded_table(params: &ModelParams, n_max: usize) -> Result<BdEmbeddedTable> {
    require_deaths(params)?;
    let a2 = params.alpha_sq();

    let mut rows: Vec<Vec<f64>> = vec![vec![1.0]];
    for n in 0..n_max {
        let prev = &rows[n];
        let mut next = vec![0.0; n + 2];
        for (j, &p) in prev.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            if j == 0 {
                next[1] += p;
            } else {
                let up = up_probability(j, a2);
                next[j + 1] += up * p;
                next[j - 1] += (1.0 - up) * p;
            }
        }
        rows.push(next);
    }

    // d_0 .. d_{n_max + 2}
    let mut d = Vec::with_capacity(n_max + 3);
    let mut acc = 1.0;
    for i in 0..=(n_max + 2) {
        let i = i as f64;
        acc /= 1.0 + i * (i - 1.0) * a2;
        d.push(acc);
    }
    let layers = n_max / 2;
    let width = n_max + 2;
    let mut t_layers = vec![vec![1.0; width]];
    for h in 1..=layers {
        let prev = &t_layers[h - 1];
        let len = width - 2 * h;
        let mut layer = Vec::with_capacity(len);
        let mut running = 0.0;
        for k in 0..len {
            running += (d[k + 1] - d[k + 2]) / d[k] * prev[k + 1];
            layer.push(running);
        }
        t_layers.push(layer);
    }

    let table = BdEmbeddedTable {
        alpha: params.alpha(),
        n_max,
        rows,
        d,
        t_layers,
        verified_cells: 0,
    };
    let mut verified = 0;
    for n in 0..=n_max {
        for k in 0..=n {
            let cf = table.closed_form(n, k);
            if !cf.is_finite() || table.d[k] < f64::MIN_POSITIVE * 1e16 {
                continue;
            }
            let rec = table.get(n, k);
            if (cf - rec).abs() > EMBEDDED_AGREEMENT_TOL {
                return Err(Error::Internal(format!(
                    "embedded chain forms disagree at n={n}, k={k}: recursion {rec:e}, product {cf:e}"
                )));
            }
            verified += 1;
        }
    }
    Ok(BdEmbeddedTable {
        verified_cells: verified,
        ..table
    })
}
