//! Direct optimization over the full probability vector.
//!
//! Both problems are solved by an augmented Lagrangian method on the single
//! inequality constraint, with `q = softmax(z)` keeping iterates inside the
//! open simplex and L-BFGS minimizing each subproblem over the logits `z`.
//! Nothing here relies on the multiplier structure the fast solvers exploit.

use crate::error::{Error, Result};

use super::{lbfgs, Moments, SolverConfig};

const MAX_OUTER: usize = 60;
const MAX_INNER: usize = 5_000;
const FEASIBILITY_TOL: f64 = 1e-11;
const STATIONARITY_TOL: f64 = 1e-11;

/// Reference solve of `C(p, v, δ)` over the full vector.
pub fn c_value_reference(p: &[f64], v: &[f64], delta: f64, cfg: &SolverConfig) -> Result<f64> {
    let m = Moments::of(p, v)?;
    if delta.is_nan() {
        return Err(Error::InvalidArgument("radius is NaN".into()));
    }
    if delta < 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if delta == 0.0 || m.constant {
        return Ok(m.mean);
    }
    let entropy_p = neg_entropy(p);
    // minimize -Σ q v  s.t.  I(p, q) - δ ≤ 0
    let z = augmented_lagrangian(p, cfg, |z, q, gf, gc| {
        let mean = softmax_mean(q, v);
        let lse = log_sum_exp(z);
        let kl = entropy_p - dot(p, z) + lse;
        for x in 0..z.len() {
            gf[x] = -q[x] * (v[x] - mean);
            gc[x] = q[x] - p[x];
        }
        (-mean, kl - delta)
    })?;
    Ok(softmax_mean(&softmax(&z), v))
}

/// Reference solve of `D(p, v, ρ)` over the full vector.
pub fn d_value_reference(p: &[f64], v: &[f64], rho: f64, cfg: &SolverConfig) -> Result<f64> {
    let m = Moments::of(p, v)?;
    if rho.is_nan() {
        return Err(Error::InvalidArgument("target level is NaN".into()));
    }
    if rho <= m.mean {
        return Ok(0.0);
    }
    if rho >= m.max {
        return Ok(f64::INFINITY);
    }
    let entropy_p = neg_entropy(p);
    // minimize I(p, q)  s.t.  ρ - Σ q v ≤ 0
    let z = augmented_lagrangian(p, cfg, |z, q, gf, gc| {
        let mean = softmax_mean(q, v);
        let lse = log_sum_exp(z);
        let kl = entropy_p - dot(p, z) + lse;
        for x in 0..z.len() {
            gf[x] = q[x] - p[x];
            gc[x] = -q[x] * (v[x] - mean);
        }
        (kl, rho - mean)
    })?;
    let lse = log_sum_exp(&z);
    Ok((entropy_p - dot(p, &z) + lse).max(0.0))
}

/// Runs the augmented Lagrangian loop for `min f(z) s.t. c(z) ≤ 0`.
///
/// `eval(z, q, grad_f, grad_c)` receives the logits and `q = softmax(z)` and
/// returns `(f, c)`.
fn augmented_lagrangian(
    p: &[f64],
    cfg: &SolverConfig,
    eval: impl Fn(&[f64], &[f64], &mut [f64], &mut [f64]) -> (f64, f64),
) -> Result<Vec<f64>> {
    let n = p.len();
    let mut z: Vec<f64> = p.iter().map(|pi| pi.ln()).collect();
    let mut multiplier = 0.0f64;
    let mut penalty = 10.0f64;
    let mut last_violation = f64::INFINITY;
    let mut gf = vec![0.0; n];
    let mut gc = vec![0.0; n];
    let mut q = vec![0.0; n];

    for _ in 0..MAX_OUTER {
        let (y, mu) = (multiplier, penalty);
        let sub = lbfgs::minimize(
            |z, grad| {
                softmax_into(z, &mut q);
                let (f, c) = eval(z, &q, &mut gf, &mut gc);
                let shifted = (y + mu * c).max(0.0);
                for x in 0..n {
                    grad[x] = gf[x] + shifted * gc[x];
                }
                f + (shifted * shifted - y * y) / (2.0 * mu)
            },
            z,
            STATIONARITY_TOL,
            MAX_INNER,
        );
        z = sub.x;
        softmax_into(&z, &mut q);
        let (_, c) = eval(&z, &q, &mut gf, &mut gc);
        let violation = c.max(-multiplier / penalty).abs();
        multiplier = (multiplier + penalty * c).max(0.0);
        if violation <= FEASIBILITY_TOL && sub.grad_norm <= cfg.cross_check_tol * 1e-4 {
            return Ok(z);
        }
        if violation > 0.25 * last_violation && penalty < 1e10 {
            penalty *= 10.0;
        }
        last_violation = violation;
    }
    if last_violation <= cfg.cross_check_tol * 1e-3 {
        return Ok(z);
    }
    Err(Error::ReferenceNoConvergence(format!(
        "constraint violation {last_violation:e} after {MAX_OUTER} outer iterations"
    )))
}

fn neg_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; z.len()];
    softmax_into(z, &mut q);
    q
}

fn softmax_into(z: &[f64], q: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (qi, zi) in q.iter_mut().zip(z) {
        *qi = (zi - m).exp();
        sum += *qi;
    }
    q.iter_mut().for_each(|qi| *qi /= sum);
}

fn softmax_mean(q: &[f64], v: &[f64]) -> f64 {
    dot(q, v)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
