//! Minimum KL perturbation reaching a target mean, reduced to one unknown.
//!
//! `D(p, v, ρ) = inf { I(p, q) : Σ q_x v_x ≥ ρ }`. In the interior regime
//! `μ_p < ρ < V` the minimizer is `q*_x = p_x / (1 + (ρ - v_x) λ)` where
//! `λ ∈ (0, 1/(V - ρ))` is the unique root of
//!
//! ```text
//! h(λ) = Σ_x p_x (ρ - v_x) / (1 + (ρ - v_x) λ)
//! ```
//!
//! which is positive at `λ = 0` and falls to `-∞` at the right end.

use crate::error::{Error, Result};

use super::{root::decreasing_root, Moments, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmedStatus {
    /// `μ_p < ρ < V`, solved through the multiplier equation.
    Interior,
    /// `ρ > V`, or `ρ = V` with non-constant `v`: no interior distribution
    /// reaches the target. The value is `+∞`.
    Infeasible,
    /// `ρ ≤ μ_p`: `q = p` already qualifies.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmedSolution {
    /// `D(p, v, ρ)`; `+∞` exactly when `status` is `Infeasible`.
    pub value: f64,
    /// Multiplier `λ`, interior solves only.
    pub lambda: Option<f64>,
    /// Minimizing distribution (`p` itself for `Zero`).
    pub optimizer: Option<Vec<f64>>,
    pub status: DmedStatus,
}

pub(crate) struct Kernel {
    pub lambda: f64,
    pub value: f64,
}

/// Interior solve at target `ρ = V - slack`, with `gaps[x] = V - v[x]`.
/// The caller guarantees `0 < slack < V - μ_p`.
///
/// Working with the slack instead of `ρ` keeps `ρ - v_x = gaps[x] - slack`
/// accurate when the target sits a few ulps below `V`.
pub(crate) fn kernel(p: &[f64], gaps: &[f64], slack: f64, cfg: &SolverConfig) -> Result<Kernel> {
    let mut h0 = 0.0;
    let mut second = 0.0;
    for (pi, gi) in p.iter().zip(gaps) {
        let d = gi - slack;
        h0 += pi * d;
        second += pi * d * d;
    }
    // One Newton step from λ = 0.
    let guess = h0 / second;
    // h and h' scaled by Σ p|r|: same Newton steps, relative stopping test.
    let root = decreasing_root(
        |lambda| {
            let mut h = 0.0;
            let mut dh = 0.0;
            let mut size = 0.0;
            for (pi, gi) in p.iter().zip(gaps) {
                let d = gi - slack;
                let r = d / (1.0 + d * lambda);
                h += pi * r;
                dh -= pi * r * r;
                size += pi * r.abs();
            }
            (h / size, dh / size)
        },
        0.0,
        1.0 / slack,
        guess,
        1e-14,
        cfg.max_iter,
    )?;
    let lambda = root.x;
    let value = p
        .iter()
        .zip(gaps)
        .map(|(pi, gi)| pi * ((gi - slack) * lambda).ln_1p())
        .sum::<f64>()
        .max(0.0);
    Ok(Kernel { lambda, value })
}

pub(crate) fn gaps(v: &[f64], m: &Moments) -> Vec<f64> {
    v.iter().map(|vi| m.max - vi).collect()
}

/// Fast one-unknown solve of `D(p, v, ρ)` with the degenerate cases
/// short-circuited.
pub fn d_value_fast(p: &[f64], v: &[f64], rho: f64, cfg: &SolverConfig) -> Result<DmedSolution> {
    let m = Moments::of(p, v)?;
    if rho.is_nan() {
        return Err(Error::InvalidArgument("target level is NaN".into()));
    }
    if rho > m.max {
        return Ok(DmedSolution::infeasible());
    }
    if rho <= m.mean {
        return Ok(DmedSolution {
            value: 0.0,
            lambda: None,
            optimizer: Some(p.to_vec()),
            status: DmedStatus::Zero,
        });
    }
    if rho >= m.max {
        // Only reachable with non-constant v (constant v has mean == max).
        return Ok(DmedSolution::infeasible());
    }
    let k = kernel(p, &gaps(v, &m), m.max - rho, cfg)?;
    let optimizer = p
        .iter()
        .zip(v)
        .map(|(pi, vi)| pi / (1.0 + (rho - vi) * k.lambda))
        .collect();
    Ok(DmedSolution {
        value: k.value,
        lambda: Some(k.lambda),
        optimizer: Some(optimizer),
        status: DmedStatus::Interior,
    })
}

impl DmedSolution {
    fn infeasible() -> Self {
        Self {
            value: f64::INFINITY,
            lambda: None,
            optimizer: None,
            status: DmedStatus::Infeasible,
        }
    }
}
