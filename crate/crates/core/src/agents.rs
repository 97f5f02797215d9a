//! The four index policies. Each round every agent rebuilds the same
//! estimated model from the counts ([`estimate_round`]) and then scores the
//! actions of the current state in its own way.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{estimated_mdp, good_action_set, CountTable};
use crate::mdp::{argmax_lowest, dot, solve_optimality_from, GainBias, Mdp, TIE_TOL};
use crate::solvers::{b_value, c_value_fast, d_value_fast, dirichlet_sample, DmedStatus, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AgentKind {
    MdpUcb,
    MdpDmed,
    Olp,
    MdpPs,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [Self::MdpUcb, Self::MdpDmed, Self::Olp, Self::MdpPs];

    pub fn name(self) -> &'static str {
        match self {
            Self::MdpUcb => "mdp-ucb",
            Self::MdpDmed => "mdp-dmed",
            Self::Olp => "olp",
            Self::MdpPs => "mdp-ps",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm `{s}`")))
    }
}

/// The estimated model of one round.
#[derive(Debug, Clone)]
pub struct RoundEstimate {
    /// Known rewards with smoothed transition estimates.
    pub mdp: Mdp,
    /// Good action set of every state.
    pub good_actions: Vec<Vec<usize>>,
    /// Optimality equations of `mdp` restricted to `good_actions`.
    pub gain_bias: GainBias,
}

/// Builds `P̂_t` and `Â_t` and solves the restricted optimality equations.
/// `warm_start` seeds relative value iteration (typically last round's bias).
pub fn estimate_round(counts: &CountTable, mdp: &Mdp, warm_start: Option<&[f64]>) -> Result<RoundEstimate> {
    if counts.n_states() != mdp.n_states() || counts.n_states() == 0 {
        return Err(Error::Dimension {
            expected: mdp.n_states(),
            got: counts.n_states(),
        });
    }
    let estimated = estimated_mdp(counts, mdp);
    let good_actions: Vec<Vec<usize>> = (0..mdp.n_states()).map(|x| good_action_set(counts, x)).collect();
    let gain_bias = solve_optimality_from(&estimated, &good_actions, warm_start)?;
    Ok(RoundEstimate {
        mdp: estimated,
        good_actions,
        gain_bias,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Decision {
    pub action: usize,
    /// Per action of the current state: `u_a(t)` for MDP-UCB and OLP,
    /// `D_t(a)` for MDP-DMED (`-∞` for the estimated best action), `W_a(t)`
    /// for MDP-PS.
    pub diagnostics: Vec<f64>,
    pub estimated_gain_bias: GainBias,
}

fn check_round(x: usize, t: u64, est: &RoundEstimate) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidArgument("rounds start at t = 1".into()));
    }
    if x >= est.mdp.n_states() {
        return Err(Error::OutOfRange {
            what: "state",
            index: x,
            bound: est.mdp.n_states(),
        });
    }
    Ok(())
}

fn decide(diagnostics: Vec<f64>, est: &RoundEstimate) -> Decision {
    Decision {
        action: argmax_lowest(&diagnostics),
        diagnostics,
        estimated_gain_bias: est.gain_bias.clone(),
    }
}

/// KL-optimistic index `u_a(t) = r + C(p̂^a, v̂, ln t / T^a_x)`.
pub fn ucb_step(x: usize, counts: &CountTable, t: u64, est: &RoundEstimate, cfg: &SolverConfig) -> Result<Decision> {
    check_round(x, t, est)?;
    let v = &est.gain_bias.bias;
    let v_max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_t = (t as f64).ln();
    let mut index = Vec::with_capacity(est.mdp.n_actions(x));
    for a in 0..est.mdp.n_actions(x) {
        let r = est.mdp.reward(x, a);
        let n = counts.action_visits(x, a);
        let u = if n == 0 {
            r + v_max
        } else {
            r + c_value_fast(est.mdp.row(x, a), v, log_t / n as f64, cfg)?.value
        };
        index.push(u);
    }
    Ok(decide(index, est))
}

/// L1-optimistic index `u_a(t) = r + B(p̂^a, v̂, √(2 ln t / T^a_x))`.
pub fn olp_step(x: usize, counts: &CountTable, t: u64, est: &RoundEstimate) -> Result<Decision> {
    check_round(x, t, est)?;
    let v = &est.gain_bias.bias;
    let log_t = (t as f64).ln();
    let mut index = Vec::with_capacity(est.mdp.n_actions(x));
    for a in 0..est.mdp.n_actions(x) {
        let n = counts.action_visits(x, a);
        let radius = if n == 0 { 2.0 } else { (2.0 * log_t / n as f64).sqrt() };
        index.push(est.mdp.reward(x, a) + b_value(est.mdp.row(x, a), v, radius)?.value);
    }
    Ok(decide(index, est))
}

/// Discrepancy rule: play the action whose count lags furthest behind
/// `ln t / K̃`, or the estimated best action when none lags.
pub fn dmed_step(x: usize, counts: &CountTable, t: u64, est: &RoundEstimate, cfg: &SolverConfig) -> Result<Decision> {
    check_round(x, t, est)?;
    let v = &est.gain_bias.bias;
    let n_actions = est.mdp.n_actions(x);
    let l: Vec<f64> = (0..n_actions)
        .map(|a| est.mdp.reward(x, a) + dot(est.mdp.row(x, a), v))
        .collect();
    let best = argmax_lowest(&l);
    let log_t = (t as f64).ln();

    let mut disc = vec![f64::NEG_INFINITY; n_actions];
    for a in (0..n_actions).filter(|&a| a != best) {
        let n = counts.action_visits(x, a) as f64;
        if l[a] >= l[best] - TIE_TOL {
            // Tied with the best action: the target is already met.
            disc[a] = f64::INFINITY;
            continue;
        }
        let rho = l[best] - est.mdp.reward(x, a);
        let k = d_value_fast(est.mdp.row(x, a), v, rho, cfg)?;
        disc[a] = match k.status {
            DmedStatus::Infeasible => -n,
            DmedStatus::Zero => f64::INFINITY,
            DmedStatus::Interior if k.value == 0.0 => f64::INFINITY,
            DmedStatus::Interior => log_t / k.value - n,
        };
    }
    let lagging = argmax_lowest(&disc);
    let action = if n_actions > 1 && disc[lagging] > 0.0 {
        lagging
    } else {
        best
    };
    Ok(Decision {
        action,
        diagnostics: disc,
        estimated_gain_bias: est.gain_bias.clone(),
    })
}

/// Posterior-sampled values `W_a = r + Σ_y Q^a_y v̂_y`, `Q^a ~ Dir(T^a_x + 1)`.
pub fn ps_step<R: Rng + ?Sized>(
    x: usize,
    counts: &CountTable,
    t: u64,
    est: &RoundEstimate,
    rng: &mut R,
) -> Result<Decision> {
    check_round(x, t, est)?;
    let v = &est.gain_bias.bias;
    let mut alpha = vec![0.0; est.mdp.n_states()];
    let mut w = Vec::with_capacity(est.mdp.n_actions(x));
    for a in 0..est.mdp.n_actions(x) {
        for (al, &c) in alpha.iter_mut().zip(counts.transition_counts(x, a)) {
            *al = c as f64 + 1.0;
        }
        let q = dirichlet_sample(&alpha, rng)?;
        w.push(est.mdp.reward(x, a) + dot(&q, v));
    }
    Ok(decide(w, est))
}

/// Anything that picks an action from the current state and the counts.
pub trait Policy {
    fn act(&mut self, x: usize, counts: &CountTable, mdp: &Mdp) -> Result<usize>;
}

/// One of the four index policies with its per-trajectory state: the rng
/// used by posterior sampling and the previous bias for warm starts.
#[derive(Debug, Clone)]
pub struct Agent {
    kind: AgentKind,
    cfg: SolverConfig,
    rng: ChaCha8Rng,
    warm: Option<Vec<f64>>,
}

impl Agent {
    pub fn new(kind: AgentKind, cfg: SolverConfig, seed: u64) -> Self {
        Self::with_rng(kind, cfg, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(kind: AgentKind, cfg: SolverConfig, rng: ChaCha8Rng) -> Self {
        Self {
            kind,
            cfg,
            rng,
            warm: None,
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    /// Decides round `t = counts.t() + 1` from state `x`.
    pub fn step(&mut self, x: usize, counts: &CountTable, mdp: &Mdp) -> Result<Decision> {
        let est = estimate_round(counts, mdp, self.warm.as_deref())?;
        let t = counts.t() + 1;
        let decision = match self.kind {
            AgentKind::MdpUcb => ucb_step(x, counts, t, &est, &self.cfg)?,
            AgentKind::MdpDmed => dmed_step(x, counts, t, &est, &self.cfg)?,
            AgentKind::Olp => olp_step(x, counts, t, &est)?,
            AgentKind::MdpPs => ps_step(x, counts, t, &est, &mut self.rng)?,
        };
        self.warm = Some(est.gain_bias.bias);
        Ok(decision)
    }
}

impl Policy for Agent {
    fn act(&mut self, x: usize, counts: &CountTable, mdp: &Mdp) -> Result<usize> {
        Ok(self.step(x, counts, mdp)?.action)
    }
}
