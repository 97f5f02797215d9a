//! Seeded regret simulations.
//!
//! Regret is accounted through the realized decomposition
//! `R(T) = Σ_x Σ_a T^a_x(T) Δ(x, a)`, with the gaps `Δ` computed once from
//! the true model. Every replication derives its own seed from the master
//! seed, so results do not depend on how replications are scheduled.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agents::{Agent, AgentKind, Policy};
use crate::error::{Error, Result};
use crate::estimation::CountTable;
use crate::mdp::{delta_gap, solve_optimality_all, Mdp};
use crate::solvers::SolverConfig;

/// z-quantile of the two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

/// Counts of the robustness experiment: per state, action 1 then action 2.
/// Under these estimates the greedy policy picks the wrong action everywhere.
pub const RIG_TABLE: [[[u64; 3]; 2]; 3] = [[[8, 1, 1], [1, 1, 8]], [[1, 1, 8], [8, 1, 1]], [[8, 1, 1], [1, 1, 8]]];

#[derive(Debug, Clone)]
pub struct Scenario {
    pub mdp: Mdp,
    pub agent: AgentKind,
    pub horizon: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub initial_state: usize,
    pub rigged_counts: Option<CountTable>,
    pub solver: SolverConfig,
}

impl Scenario {
    pub fn new(mdp: Mdp, agent: AgentKind, horizon: usize, replications: usize, master_seed: u64) -> Self {
        Self {
            mdp,
            agent,
            horizon,
            replications,
            master_seed,
            initial_state: 0,
            rigged_counts: None,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.replications == 0 {
            return Err(Error::InvalidArgument(
                "horizon and replications must be at least 1".into(),
            ));
        }
        if self.initial_state >= self.mdp.n_states() {
            return Err(Error::OutOfRange {
                what: "initial state",
                index: self.initial_state,
                bound: self.mdp.n_states(),
            });
        }
        if let Some(c) = &self.rigged_counts {
            let shape_ok = c.n_states() == self.mdp.n_states()
                && (0..c.n_states()).all(|x| c.n_actions(x) == self.mdp.n_actions(x));
            if !shape_ok {
                return Err(Error::InvalidArgument("rigged counts do not match the MDP".into()));
            }
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretSeries {
    pub replication_id: usize,
    /// `regret[t - 1] = R(t)` for `t = 1..=horizon`.
    pub regret: Vec<f64>,
}

impl RegretSeries {
    pub fn last(&self) -> f64 {
        self.regret.last().copied().unwrap_or(0.0)
    }
}

/// Per-step mean, sample variance and normal 95% half-width.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub replications: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub ci_half_width: Vec<f64>,
    /// False with a single replication; the variance is then reported as 0.
    pub variance_defined: bool,
}

/// Regret gaps of the true model, `gaps[x][a] = Δ(x, a)`, exactly 0 on
/// optimal actions.
pub fn regret_gaps(mdp: &Mdp) -> Result<Vec<Vec<f64>>> {
    let gb = solve_optimality_all(mdp)?;
    (0..mdp.n_states())
        .map(|x| {
            (0..mdp.n_actions(x))
                .map(|a| delta_gap(x, a, &gb, mdp).map(|d| d.max(0.0)))
                .collect()
        })
        .collect()
}

/// SplitMix64 output function applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one replication.
pub fn child_seed(master_seed: u64, replication_id: usize) -> u64 {
    splitmix64(master_seed ^ replication_id as u64)
}

/// Environment (stream 0) and agent (stream 1) generators of a replication.
pub fn replication_rngs(master_seed: u64, replication_id: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let seed = child_seed(master_seed, replication_id);
    let env = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = ChaCha8Rng::seed_from_u64(seed);
    agent.set_stream(1);
    (env, agent)
}

fn sample_next<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (y, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return y;
        }
    }
    row.len() - 1
}

/// Runs `policy` for `horizon` rounds from `initial_state`, starting from
/// `counts` (empty or preloaded). Returns `R(1..=horizon)` and the final
/// counts.
pub fn run_policy<P: Policy + ?Sized, R: Rng + ?Sized>(
    mdp: &Mdp,
    gaps: &[Vec<f64>],
    policy: &mut P,
    horizon: usize,
    initial_state: usize,
    mut counts: CountTable,
    env_rng: &mut R,
) -> Result<(Vec<f64>, CountTable)> {
    let mut x = initial_state;
    counts.enter(x)?;
    let mut total = 0.0;
    let mut regret = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let a = policy.act(x, &counts, mdp)?;
        if a >= mdp.n_actions(x) {
            return Err(Error::OutOfRange {
                what: "action",
                index: a,
                bound: mdp.n_actions(x),
            });
        }
        total += gaps[x][a];
        regret.push(total);
        let y = sample_next(mdp.row(x, a), env_rng);
        counts.record_transition(x, a, y)?;
        x = y;
    }
    Ok((regret, counts))
}

fn initial_counts(scenario: &Scenario) -> CountTable {
    scenario
        .rigged_counts
        .clone()
        .unwrap_or_else(|| CountTable::new(&scenario.mdp))
}

fn trajectory(scenario: &Scenario, gaps: &[Vec<f64>], replication_id: usize) -> Result<RegretSeries> {
    let (mut env, agent_rng) = replication_rngs(scenario.master_seed, replication_id);
    let mut agent = Agent::with_rng(scenario.agent, scenario.solver, agent_rng);
    let (regret, _) = run_policy(
        &scenario.mdp,
        gaps,
        &mut agent,
        scenario.horizon,
        scenario.initial_state,
        initial_counts(scenario),
        &mut env,
    )?;
    Ok(RegretSeries { replication_id, regret })
}

/// One replication; bit-reproducible from `(master_seed, replication_id)`.
pub fn run_trajectory(scenario: &Scenario, replication_id: usize) -> Result<RegretSeries> {
    scenario.validate()?;
    if replication_id >= scenario.replications {
        return Err(Error::OutOfRange {
            what: "replication",
            index: replication_id,
            bound: scenario.replications,
        });
    }
    trajectory(scenario, &regret_gaps(&scenario.mdp)?, replication_id)
}

/// Every replication of `scenario`, in replication order. `threads` caps the
/// worker count (`None`: all cores); the result does not depend on it.
pub fn run_all(scenario: &Scenario, threads: Option<usize>) -> Result<Vec<RegretSeries>> {
    scenario.validate()?;
    let gaps = regret_gaps(&scenario.mdp)?;
    let ids = 0..scenario.replications;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let job = || {
            ids.into_par_iter()
                .map(|r| trajectory(scenario, &gaps, r))
                .collect::<Result<Vec<_>>>()
        };
        match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
                .install(job),
            None => job(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        ids.map(|r| trajectory(scenario, &gaps, r)).collect()
    }
}

/// Runs and aggregates every replication.
pub fn replicate(scenario: &Scenario, threads: Option<usize>) -> Result<ReplicationSummary> {
    summarize(&run_all(scenario, threads)?)
}

pub fn summarize(series: &[RegretSeries]) -> Result<ReplicationSummary> {
    let n = series.len();
    let Some(first) = series.first() else {
        return Err(Error::InvalidArgument("no replications to summarize".into()));
    };
    let len = first.regret.len();
    if series.iter().any(|s| s.regret.len() != len) {
        return Err(Error::InvalidArgument("replications differ in length".into()));
    }
    let nf = n as f64;
    let mut mean = vec![0.0; len];
    let mut variance = vec![0.0; len];
    let mut ci_half_width = vec![0.0; len];
    for t in 0..len {
        let m = series.iter().map(|s| s.regret[t]).sum::<f64>() / nf;
        mean[t] = m;
        if n > 1 {
            let ss: f64 = series.iter().map(|s| (s.regret[t] - m).powi(2)).sum();
            variance[t] = ss / (nf - 1.0);
            ci_half_width[t] = Z_95 * (variance[t] / nf).sqrt();
        }
    }
    Ok(ReplicationSummary {
        replications: n,
        mean,
        variance,
        ci_half_width,
        variance_defined: n > 1,
    })
}

/// Preloads the robustness counts into an empty table of a 3-state,
/// 2-action model: 60 transitions, 10 per state-action pair.
pub fn rig_counts(counts: CountTable) -> Result<CountTable> {
    if counts.n_states() != 3 || (0..3).any(|x| counts.n_actions(x) != 2) {
        return Err(Error::InvalidArgument(
            "rigged counts need a 3-state model with 2 actions per state".into(),
        ));
    }
    if !counts.is_empty() {
        return Err(Error::NonEmptyCounts);
    }
    let mut counts = counts;
    for (x, rows) in RIG_TABLE.iter().enumerate() {
        for (a, row) in rows.iter().enumerate() {
            counts.preload(x, a, row);
        }
    }
    Ok(counts)
}

/// Long-format CSV `replication,t,regret`.
pub fn write_raw_csv<W: Write>(series: &[RegretSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replication", "t", "regret"]).map_err(csv_error)?;
    for s in series {
        for (i, r) in s.regret.iter().enumerate() {
            w.serialize((s.replication_id, i + 1, r)).map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// CSV `t,mean_regret,ci_lower,ci_upper,variance`.
pub fn write_summary_csv<W: Write>(summary: &ReplicationSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "mean_regret", "ci_lower", "ci_upper", "variance"])
        .map_err(csv_error)?;
    for t in 0..summary.mean.len() {
        let (m, h) = (summary.mean[t], summary.ci_half_width[t]);
        w.serialize((t + 1, m, m - h, m + h, summary.variance[t]))
            .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
