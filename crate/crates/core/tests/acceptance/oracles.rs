//! Reference computations that share no code with the library.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Classic fourth-order Runge-Kutta for `y' = f(y)` with fixed step `h`,
/// returning the state after each of `checkpoints` steps counts.
pub fn rk4<F>(y0: Vec<f64>, h: f64, checkpoints: &[usize], f: F) -> Vec<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0;
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut step = 0;
    for &target in checkpoints {
        while step < target {
            f(&y, &mut k1);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            f(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            f(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + h * k3[i];
            }
            f(&tmp, &mut k4);
            for i in 0..n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            step += 1;
        }
        out.push(y.clone());
    }
    out
}

/// Forward equations of the birth-death chain with birth rate
/// `lambda / (1 + k)` and death rate `k mu`, cut at `states` states.
/// Births out of the last state are suppressed so mass is conserved.
pub fn bd_forward(lambda: f64, mu: f64, states: usize) -> impl Fn(&[f64], &mut [f64]) {
    move |p: &[f64], dp: &mut [f64]| {
        for k in 0..states {
            let birth = if k + 1 < states { lambda / (1.0 + k as f64) } else { 0.0 };
            let death = k as f64 * mu;
            let mut v = -(birth + death) * p[k];
            if k > 0 {
                v += lambda / k as f64 * p[k - 1];
            }
            if k + 1 < states {
                v += (k + 1) as f64 * mu * p[k + 1];
            }
            dp[k] = v;
        }
    }
}

/// Law of the urn after `n` draws, by enumerating every success/failure
/// sequence with exact rational weights.
pub fn urn_law_by_enumeration(n: usize) -> Vec<BigRational> {
    let mut law = vec![BigRational::zero(); n + 1];
    for mask in 0u64..(1u64 << n) {
        let mut z = 0usize;
        let mut w = BigRational::one();
        for step in 0..n {
            let p = BigRational::new(BigInt::one(), BigInt::from(z + 1));
            if mask >> step & 1 == 1 {
                w *= p;
                z += 1;
            } else {
                w *= BigRational::one() - p;
            }
            if w.is_zero() {
                break;
            }
        }
        law[z] += w;
    }
    law
}

pub fn mean_of(law: &[BigRational]) -> BigRational {
    law.iter()
        .enumerate()
        .map(|(k, p)| p * BigInt::from(k))
        .fold(BigRational::zero(), |a, b| a + b)
}

pub fn poisson_pmf(l: usize, rate: f64) -> f64 {
    let mut p = (-rate).exp();
    for i in 1..=l {
        p *= rate / i as f64;
    }
    p
}

/// Stationary probability that node `n` has out-degree `k`, by summing over
/// the live population `l` and normalizing each conditional law from
/// scratch: `sum_l P(N = l) [k < l - n] w_k / sum_{m < l-n} w_m`, divided by
/// `P(N >= n + 1)`, with `w_m = rate^m / (m!)^2`.
pub fn unconditional_double_sum(n: usize, k: usize, rate: f64, l_cap: usize) -> f64 {
    let w = |m: usize| {
        let mut v = 1.0;
        for i in 1..=m {
            v *= rate / (i * i) as f64;
        }
        v
    };
    let mut acc = 0.0;
    for l in (n + 1)..=l_cap {
        if k >= l - n {
            continue;
        }
        let z: f64 = (0..(l - n)).map(w).sum();
        acc += poisson_pmf(l, rate) * w(k) / z;
    }
    // upper tail summed directly; 1 - lower sum cancels badly when it is tiny
    let present: f64 = ((n + 1)..(n + 400)).map(|l| poisson_pmf(l, rate)).sum();
    acc / present
}
