//! Index kernels shared by the learning agents.
//!
//! * [`c_value_fast`] / [`c_value_reference`]: best mean inside a KL ball
//!   (the UCB index core).
//! * [`d_value_fast`] / [`d_value_reference`]: smallest KL perturbation that
//!   lifts the mean to a target (the DMED rate).
//! * [`b_value`]: best mean inside an L1 ball (the OLP index core).
//! * [`dirichlet_sample`]: posterior draws for posterior sampling.
//!
//! The `_fast` variants work on one or two scalar unknowns; the
//! `_reference` variants optimize over the full probability vector and exist
//! as independent cross-checks and as the slow arm of the benchmark.

mod dirichlet;
mod dmed;
mod lbfgs;
mod olp;
mod reference;
mod root;
mod ucb;

pub use dirichlet::dirichlet_sample;
pub use dmed::{d_value_fast, DmedSolution, DmedStatus};
pub use olp::{b_value, OlpSolution};
pub use reference::{c_value_reference, d_value_reference};
pub use ucb::{c_value_fast, UcbSolution, UcbStatus};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances shared by the fast and reference solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Absolute residual accepted from a root solve.
    pub root_tol: f64,
    /// Iteration cap per root solve.
    pub max_iter: usize,
    /// Agreement expected between fast and reference solvers.
    pub cross_check_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            root_tol: 1e-10,
            max_iter: 200,
            cross_check_tol: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.root_tol > 0.0 && self.cross_check_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument(format!("bad solver config {self:?}")));
        }
        Ok(())
    }
}

/// Mean, maximum and constancy of `v` under `p`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Moments {
    pub mean: f64,
    pub max: f64,
    pub constant: bool,
}

impl Moments {
    pub fn of(p: &[f64], v: &[f64]) -> Result<Self> {
        if p.len() != v.len() {
            return Err(Error::Dimension {
                expected: p.len(),
                got: v.len(),
            });
        }
        if p.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("bias vector is not finite".into()));
        }
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let constant = max - min <= 1e-12 * (1.0 + max.abs());
        let mean = if constant {
            max
        } else {
            crate::mdp::dot(p, v).clamp(min, max)
        };
        Ok(Self { mean, max, constant })
    }
}
