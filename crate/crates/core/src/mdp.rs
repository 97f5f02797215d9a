//! Finite average-reward MDPs and the optimality-equation solver.
//!
//! An [`Mdp`] holds the state count, per-state action counts, the expected
//! reward table and the transition law. [`solve_optimality`] computes the
//! gain/bias pair of the average-reward optimality equations
//!
//! ```text
//! φ + v[x] = max_a ( r[x][a] + Σ_y p[x][a][y] v[y] )
//! ```
//!
//! by relative value iteration, normalized so that `v[0] = 0`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used to detect argmax ties.
pub const TIE_TOL: f64 = 1e-9;
/// Tolerance on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Span-seminorm stopping threshold for relative value iteration.
pub const RVI_TOL: f64 = 1e-10;
/// Iteration cap for relative value iteration.
pub const RVI_MAX_ITER: usize = 1_000_000;

/// Whether probability vectors must lie in the open simplex (all entries
/// strictly positive) or may touch its boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Membership {
    /// Strictly positive entries. Required for anything an agent sees.
    #[default]
    Interior,
    /// Zero entries allowed. Only meant for synthetic fixtures.
    Closed,
}

/// A probability vector over the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(entries: Vec<f64>, membership: Membership) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("empty probability vector".into()));
        }
        let mut sum = 0.0;
        for (i, &e) in entries.iter().enumerate() {
            let ok = match membership {
                Membership::Interior => e > 0.0 && e.is_finite(),
                Membership::Closed => e >= 0.0 && e.is_finite(),
            };
            if !ok {
                return Err(Error::NonPositive {
                    state: 0,
                    action: 0,
                    next: i,
                    value: e,
                });
            }
            sum += e;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::RowSum {
                state: 0,
                action: 0,
                sum,
            });
        }
        Ok(Self(entries))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Degenerate distribution at `y`; lives on the simplex boundary.
    pub fn point_mass(n: usize, y: usize) -> Self {
        let mut e = vec![0.0; n];
        e[y] = 1.0;
        Self(e)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SimplexVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// On-disk layout of an MDP (the JSON schema consumed by the CLI).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpFile {
    pub n_states: usize,
    pub actions: Vec<usize>,
    pub rewards: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Vec<f64>>>,
}

/// A validated finite MDP `(S, A, R, P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    actions: Vec<usize>,
    rewards: Vec<Vec<f64>>,
    transitions: Vec<Vec<Vec<f64>>>,
}

impl Mdp {
    /// Builds a model, checking every structural and probabilistic invariant.
    pub fn new(
        n_states: usize,
        actions: Vec<usize>,
        rewards: Vec<Vec<f64>>,
        transitions: Vec<Vec<Vec<f64>>>,
        membership: Membership,
    ) -> Result<Self> {
        validate_mdp(
            MdpFile {
                n_states,
                actions,
                rewards,
                transitions,
            },
            membership,
        )
    }

    /// Builds a model without validation. Callers guarantee the invariants.
    pub(crate) fn from_parts_unchecked(
        n_states: usize,
        actions: Vec<usize>,
        rewards: Vec<Vec<f64>>,
        transitions: Vec<Vec<Vec<f64>>>,
    ) -> Self {
        Self {
            n_states,
            actions,
            rewards,
            transitions,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: MdpFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        validate_mdp(file, Membership::Interior)
    }

    /// The three-state, two-action model used in the regret experiments.
    pub fn example() -> Self {
        Self::from_json_str(include_str!("../data/example5.json")).expect("bundled example model is valid")
    }

    pub fn to_file(&self) -> MdpFile {
        MdpFile {
            n_states: self.n_states,
            actions: self.actions.clone(),
            rewards: self.rewards.clone(),
            transitions: self.transitions.clone(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self, x: usize) -> usize {
        self.actions[x]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn reward(&self, x: usize, a: usize) -> f64 {
        self.rewards[x][a]
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    pub fn row(&self, x: usize, a: usize) -> &[f64] {
        &self.transitions[x][a]
    }

    /// Same model with every reward mapped through `f`.
    pub fn map_rewards(&self, f: impl Fn(f64) -> f64) -> Self {
        let rewards = self
            .rewards
            .iter()
            .map(|row| row.iter().map(|&r| f(r)).collect())
            .collect();
        Self {
            rewards,
            ..self.clone()
        }
    }

    /// Every action in every state.
    pub fn all_actions(&self) -> Vec<Vec<usize>> {
        self.actions.iter().map(|&n| (0..n).collect()).collect()
    }

    fn check_state_action(&self, x: usize, a: usize) -> Result<()> {
        if x >= self.n_states {
            return Err(Error::OutOfRange {
                what: "state",
                index: x,
                bound: self.n_states,
            });
        }
        if a >= self.actions[x] {
            return Err(Error::OutOfRange {
                what: "action",
                index: a,
                bound: self.actions[x],
            });
        }
        Ok(())
    }
}

/// Checks every [`Mdp`] invariant, reporting the first violation.
pub fn validate_mdp(file: MdpFile, membership: Membership) -> Result<Mdp> {
    let MdpFile {
        n_states,
        actions,
        rewards,
        transitions,
    } = file;
    if n_states == 0 {
        return Err(Error::Ragged("model needs at least one state".into()));
    }
    if actions.len() != n_states {
        return Err(Error::Ragged(format!(
            "{} action counts for {n_states} states",
            actions.len()
        )));
    }
    if rewards.len() != n_states || transitions.len() != n_states {
        return Err(Error::Ragged(format!(
            "reward/transition tables cover {}/{} states, expected {n_states}",
            rewards.len(),
            transitions.len()
        )));
    }
    for x in 0..n_states {
        if actions[x] == 0 {
            return Err(Error::Ragged(format!("state {x} has no actions")));
        }
        if rewards[x].len() != actions[x] || transitions[x].len() != actions[x] {
            return Err(Error::Ragged(format!(
                "state {x} declares {} actions but has {} rewards and {} transition rows",
                actions[x],
                rewards[x].len(),
                transitions[x].len()
            )));
        }
        for (a, row) in transitions[x].iter().enumerate() {
            if row.len() != n_states {
                return Err(Error::Ragged(format!(
                    "transition row ({x}, {a}) has length {}, expected {n_states}",
                    row.len()
                )));
            }
        }
    }
    for (x, row) in rewards.iter().enumerate() {
        for (a, r) in row.iter().enumerate() {
            if !r.is_finite() {
                return Err(Error::NonFiniteReward { state: x, action: a });
            }
        }
    }
    for (x, rows) in transitions.iter().enumerate() {
        for (a, row) in rows.iter().enumerate() {
            for (y, &p) in row.iter().enumerate() {
                let ok = p.is_finite()
                    && match membership {
                        Membership::Interior => p > 0.0,
                        Membership::Closed => p >= 0.0,
                    };
                if !ok {
                    return Err(Error::NonPositive {
                        state: x,
                        action: a,
                        next: y,
                        value: p,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::RowSum {
                    state: x,
                    action: a,
                    sum,
                });
            }
        }
    }
    Ok(Mdp {
        n_states,
        actions,
        rewards,
        transitions,
    })
}

/// Solution of the optimality equations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainBias {
    /// Long-run average reward per step.
    pub gain: f64,
    /// Relative state values, `bias[0] == 0`.
    pub bias: Vec<f64>,
    /// Per state, the actions attaining the maximum (ascending).
    pub optimal_actions: Vec<Vec<usize>>,
    /// RVI sweeps performed.
    #[serde(skip)]
    pub iterations: usize,
}

/// `r[x][a] + Σ_y q[y] v[y]`.
pub fn l_value(x: usize, a: usize, q: &[f64], v: &[f64], mdp: &Mdp) -> Result<f64> {
    mdp.check_state_action(x, a)?;
    check_len(q, mdp.n_states)?;
    check_len(v, mdp.n_states)?;
    Ok(mdp.rewards[x][a] + dot(q, v))
}

/// Loss of playing `a` in `x` relative to an optimal action, measured with
/// the solved bias. Exactly zero for actions in `optimal_actions[x]`.
pub fn delta_gap(x: usize, a: usize, gain_bias: &GainBias, mdp: &Mdp) -> Result<f64> {
    mdp.check_state_action(x, a)?;
    check_len(&gain_bias.bias, mdp.n_states)?;
    let optimal = &gain_bias.optimal_actions[x];
    if optimal.contains(&a) {
        return Ok(0.0);
    }
    let v = &gain_bias.bias;
    let best = optimal
        .iter()
        .map(|&b| mdp.rewards[x][b] + dot(&mdp.transitions[x][b], v))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best - (mdp.rewards[x][a] + dot(&mdp.transitions[x][a], v)))
}

/// `I(p, q) = Σ p_x ln(p_x / q_x)`; `+∞` when `q` misses support of `p`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_len(q, p.len())?;
    Ok(kl_unchecked(p, q))
}

pub(crate) fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            sum += pi * (pi / qi).ln();
        }
    }
    sum
}

/// Solves the optimality equations over every action.
pub fn solve_optimality_all(mdp: &Mdp) -> Result<GainBias> {
    solve_optimality(mdp, &mdp.all_actions())
}

/// Solves the optimality equations with each state restricted to
/// `allowed_actions[x]`.
pub fn solve_optimality(mdp: &Mdp, allowed_actions: &[Vec<usize>]) -> Result<GainBias> {
    solve_optimality_from(mdp, allowed_actions, None)
}

/// [`solve_optimality`] starting relative value iteration from `warm_start`
/// instead of the zero vector.
pub fn solve_optimality_from(
    mdp: &Mdp,
    allowed_actions: &[Vec<usize>],
    warm_start: Option<&[f64]>,
) -> Result<GainBias> {
    let n = mdp.n_states;
    if allowed_actions.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: allowed_actions.len(),
        });
    }
    for (x, allowed) in allowed_actions.iter().enumerate() {
        if allowed.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "allowed action set for state {x} is empty"
            )));
        }
        if let Some(&a) = allowed.iter().find(|&&a| a >= mdp.actions[x]) {
            return Err(Error::OutOfRange {
                what: "action",
                index: a,
                bound: mdp.actions[x],
            });
        }
    }

    let mut h = match warm_start {
        Some(w) if w.len() == n && w.iter().all(|e| e.is_finite()) => {
            let base = w[0];
            w.iter().map(|e| e - base).collect()
        }
        _ => vec![0.0; n],
    };
    let mut th = vec![0.0; n];
    let bellman = |h: &[f64], th: &mut [f64]| {
        for x in 0..n {
            th[x] = allowed_actions[x]
                .iter()
                .map(|&a| mdp.rewards[x][a] + dot(&mdp.transitions[x][a], h))
                .fold(f64::NEG_INFINITY, f64::max);
        }
    };

    let mut span = f64::INFINITY;
    for iteration in 1..=RVI_MAX_ITER {
        bellman(&h, &mut th);
        let (lo, hi) = th
            .iter()
            .zip(&h)
            .map(|(t, v)| t - v)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        span = hi - lo;
        if span <= RVI_TOL {
            let optimal_actions = (0..n)
                .map(|x| {
                    argmax_set(
                        allowed_actions[x]
                            .iter()
                            .map(|&a| (a, mdp.rewards[x][a] + dot(&mdp.transitions[x][a], &h))),
                    )
                })
                .collect();
            return Ok(GainBias {
                gain: 0.5 * (lo + hi),
                bias: h,
                optimal_actions,
                iterations: iteration,
            });
        }
        if !span.is_finite() {
            break;
        }
        let base = th[0];
        for (hx, tx) in h.iter_mut().zip(&th) {
            *hx = tx - base;
        }
    }
    Err(Error::NoConvergence {
        iterations: RVI_MAX_ITER,
        span,
    })
}

/// Keys whose value is within [`TIE_TOL`] of the maximum, in input order.
pub(crate) fn argmax_set(values: impl Iterator<Item = (usize, f64)> + Clone) -> Vec<usize> {
    let best = values.clone().map(|(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    values.filter(|&(_, v)| v >= best - TIE_TOL).map(|(k, _)| k).collect()
}

/// Lowest position whose value is within [`TIE_TOL`] of the maximum.
/// `+∞` entries tie with each other; NaN never wins.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|&v| v == best || v >= best - TIE_TOL)
        .unwrap_or(0)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_len(v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Dimension { expected, got: v.len() });
    }
    Ok(())
}
