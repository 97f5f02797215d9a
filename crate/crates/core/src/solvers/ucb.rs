//! Value maximization over a KL ball, reduced to two unknowns.
//!
//! `C(p, v, δ) = sup { Σ q_x v_x : I(p, q) ≤ δ }`. Away from the degenerate
//! cases the optimum has the form `q*_x = p_x / (1 + (v_x - μ)/λ)` with the
//! pair `(μ, λ)` solving
//!
//! ```text
//! Σ_x p_x ln(1 + (v_x - μ)/λ) = δ
//! Σ_x p_x λ / (λ + v_x - μ)   = 1,     μ_p < μ < V,  λ < μ - V.
//! ```
//!
//! For a fixed `μ`, writing `η = -1/λ ∈ (0, 1/(V - μ))` turns the
//! normalization equation into the multiplier equation of
//! [`d_value_fast`](super::d_value_fast) at level `μ`, and the left side of
//! the first equation into `D(p, v, μ)`. So the inner solve is the bounded
//! one-dimensional DMED root, and the outer solve inverts the increasing map
//! `μ ↦ D(p, v, μ)`, whose derivative is `η`.

use crate::error::{Error, Result};

use super::{dmed, root::decreasing_root, Moments, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UcbStatus {
    /// Solved through the `(μ, λ)` system.
    Interior,
    /// `δ < 0`; the value is `-∞`.
    Infeasible,
    /// `δ = 0`; the value is `μ_p`.
    AtCenter,
    /// `v` constant; every feasible `q` attains `μ_p`.
    ConstantV,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcbSolution {
    /// `C(p, v, δ)`; `-∞` exactly when `status` is `Infeasible`.
    pub value: f64,
    /// `λ < value - V`, interior solves only.
    pub lambda: Option<f64>,
    /// Maximizing distribution (`p` itself in the two `μ_p` cases).
    pub optimizer: Option<Vec<f64>>,
    pub status: UcbStatus,
}

/// Fast two-unknown solve of `C(p, v, δ)`.
pub fn c_value_fast(p: &[f64], v: &[f64], delta: f64, cfg: &SolverConfig) -> Result<UcbSolution> {
    let m = Moments::of(p, v)?;
    if delta.is_nan() {
        return Err(Error::InvalidArgument("radius is NaN".into()));
    }
    if delta < 0.0 {
        return Ok(UcbSolution {
            value: f64::NEG_INFINITY,
            lambda: None,
            optimizer: None,
            status: UcbStatus::Infeasible,
        });
    }
    let center = |status| UcbSolution {
        value: m.mean,
        lambda: None,
        optimizer: Some(p.to_vec()),
        status,
    };
    if delta == 0.0 {
        return Ok(center(UcbStatus::AtCenter));
    }
    if m.constant {
        return Ok(center(UcbStatus::ConstantV));
    }

    // Solve for the slack s = V - μ ∈ (0, V - μ_p); D(p, v, V - s) falls
    // from +∞ to 0 over that range and its s-derivative is -η.
    let gaps = dmed::gaps(v, &m);
    let max_slack: f64 = p.iter().zip(&gaps).map(|(pi, gi)| pi * gi).sum();
    let variance: f64 = p.iter().zip(&gaps).map(|(pi, gi)| pi * (gi - max_slack).powi(2)).sum();
    // Quadratic approximation D ≈ (μ - μ_p)² / (2σ²).
    let guess = max_slack - (2.0 * delta * variance).sqrt();

    let mut failure = None;
    let root = decreasing_root(
        |slack| match dmed::kernel(p, &gaps, slack, cfg) {
            Ok(k) => (k.value - delta, -k.lambda),
            Err(e) => {
                failure.get_or_insert(e);
                (f64::NAN, f64::NAN)
            }
        },
        0.0,
        max_slack,
        guess,
        1e-3 * cfg.root_tol * delta.min(1.0),
        cfg.max_iter,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let slack = root?.x;
    let eta = dmed::kernel(p, &gaps, slack, cfg)?.lambda;
    let optimizer = p
        .iter()
        .zip(&gaps)
        .map(|(pi, gi)| pi / (1.0 + eta * (gi - slack)))
        .collect();
    // The supremum is never attained on the open simplex; keep the reported
    // value strictly below V even when the slack is under one ulp.
    let value = (m.max - slack).min(m.max.next_down()).max(m.mean);
    Ok(UcbSolution {
        value,
        lambda: Some(-1.0 / eta),
        optimizer: Some(optimizer),
        status: UcbStatus::Interior,
    })
}
