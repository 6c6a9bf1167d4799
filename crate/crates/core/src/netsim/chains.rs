//! Single-process Monte Carlo oracles.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp, Geometric};

use crate::error::Result;
use crate::model::ModelParams;
use crate::queue::require_deaths;
use crate::statcheck::EmpiricalDist;

/// Urn trajectory `Z_0..=Z_n`: step `m` succeeds with probability
/// `1 / (1 + Z_{m-1})`, starting from `Z_0 = 0`.
pub fn simulate_urn_chain<R: RngCore + ?Sized>(n_steps: usize, rng: &mut R) -> Vec<u32> {
    let mut traj = Vec::with_capacity(n_steps + 1);
    let mut z = 0u32;
    traj.push(z);
    for _ in 0..n_steps {
        if rng.random::<f64>() < 1.0 / (1.0 + f64::from(z)) {
            z += 1;
        }
        traj.push(z);
    }
    traj
}

/// Steps (1-based) at which the urn succeeds within the first `n_steps`.
///
/// Waiting times between successes are geometric, so the cost grows with
/// the number of successes rather than with `n_steps`.
pub fn urn_success_epochs<R: RngCore + ?Sized>(n_steps: u64, rng: &mut R) -> Vec<u64> {
    let mut epochs = Vec::new();
    let mut step = 0u64;
    loop {
        let p = 1.0 / (1.0 + epochs.len() as f64);
        let failures = Geometric::new(p).expect("p in (0, 1]").sample(rng);
        step = step.saturating_add(failures).saturating_add(1);
        if step > n_steps {
            return epochs;
        }
        epochs.push(step);
    }
}

/// `Z_n` alone, via geometric skipping.
pub fn urn_state_after<R: RngCore + ?Sized>(n_steps: u64, rng: &mut R) -> u32 {
    urn_success_epochs(n_steps, rng).len() as u32
}

/// Jump chain of the birth–death out-degree: from `j > 0` it moves up with
/// probability `1 / (1 + j(j+1) alpha^2)`, from 0 always up.
pub fn simulate_bd_jump_chain<R: RngCore + ?Sized>(
    n_steps: usize,
    params: &ModelParams,
    rng: &mut R,
) -> Result<Vec<u32>> {
    require_deaths(params)?;
    let a2 = params.alpha_sq();
    let mut traj = Vec::with_capacity(n_steps + 1);
    let mut j = 0u32;
    traj.push(j);
    for _ in 0..n_steps {
        let jf = f64::from(j);
        let up = j == 0 || rng.random::<f64>() < 1.0 / (1.0 + jf * (jf + 1.0) * a2);
        if up {
            j += 1;
        } else {
            j -= 1;
        }
        traj.push(j);
    }
    Ok(traj)
}

/// Piecewise-constant path: `states[i]` holds on `[jump_times[i], jump_times[i+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct BdTrajectory {
    pub jump_times: Vec<f64>,
    pub states: Vec<u32>,
    pub t_end: f64,
}

impl BdTrajectory {
    pub fn state_at(&self, t: f64) -> u32 {
        let idx = self.jump_times.partition_point(|&s| s <= t);
        self.states[idx.saturating_sub(1)]
    }

    pub fn final_state(&self) -> u32 {
        *self.states.last().expect("trajectory starts at state 0")
    }

    /// Holding time of each visited state, truncated at `t_end`.
    pub fn holding_times(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.jump_times.windows(2).map(|w| w[1] - w[0]).collect();
        out.push(self.t_end - self.jump_times.last().expect("non-empty"));
        out
    }
}

fn bd_rates(k: u32, params: &ModelParams) -> (f64, f64) {
    let kf = f64::from(k);
    (params.lambda() / (1.0 + kf), kf * params.mu())
}

/// Continuous-time birth–death path with birth rate `lambda / (1 + k)` and
/// death rate `k mu`, from state 0 at time 0 up to `t_end`.
pub fn simulate_single_node_bd<R: RngCore + ?Sized>(
    t_end: f64,
    params: &ModelParams,
    rng: &mut R,
) -> Result<BdTrajectory> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(crate::error::domain(format!("t_end must be positive, got {t_end}")));
    }
    let mut jump_times = vec![0.0];
    let mut states = vec![0u32];
    let mut t = 0.0;
    let mut k = 0u32;
    loop {
        let (up, down) = bd_rates(k, params);
        let total = up + down;
        t += Exp::new(total).expect("positive rate").sample(rng);
        if t >= t_end {
            break;
        }
        if rng.random::<f64>() * total < up {
            k += 1;
        } else {
            k -= 1;
        }
        jump_times.push(t);
        states.push(k);
    }
    Ok(BdTrajectory {
        jump_times,
        states,
        t_end,
    })
}

/// Time-weighted occupancy of the birth–death process over `n_jumps` jumps,
/// started from state 0. Requires `mu > 0`.
pub fn single_node_occupancy<R: RngCore + ?Sized>(
    n_jumps: u64,
    params: &ModelParams,
    rng: &mut R,
) -> Result<EmpiricalDist> {
    require_deaths(params)?;
    let mut occ = EmpiricalDist::new();
    let mut k = 0u32;
    for _ in 0..n_jumps {
        let (up, down) = bd_rates(k, params);
        let total = up + down;
        let hold = Exp::new(total).expect("positive rate").sample(rng);
        occ.add(k as usize, hold);
        if rng.random::<f64>() * total < up {
            k += 1;
        } else {
            k -= 1;
        }
    }
    Ok(occ)
}
