//! Trajectory counters and the smoothed estimators built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;

/// Visit and transition counts of one trajectory.
///
/// A state's visit is counted when the state is entered, so the state the
/// agent currently sits in already has its visit recorded while the action
/// taken there is still pending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    n_states: usize,
    visits: Vec<u64>,
    action_visits: Vec<Vec<u64>>,
    transition_counts: Vec<Vec<Vec<u64>>>,
    t: u64,
}

/// JSON snapshot layout of a [`CountTable`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSnapshot {
    pub visits: Vec<u64>,
    pub action_visits: Vec<Vec<u64>>,
    pub transition_counts: Vec<Vec<Vec<u64>>>,
}

impl CountTable {
    /// Empty table shaped after `mdp`.
    pub fn new(mdp: &Mdp) -> Self {
        Self::with_shape(mdp.n_states(), mdp.actions())
    }

    pub fn with_shape(n_states: usize, actions: &[usize]) -> Self {
        Self {
            n_states,
            visits: vec![0; n_states],
            action_visits: actions.iter().map(|&n| vec![0; n]).collect(),
            transition_counts: actions.iter().map(|&n| vec![vec![0; n_states]; n]).collect(),
            t: 0,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self, x: usize) -> usize {
        self.action_visits[x].len()
    }

    /// `T_x`.
    pub fn visits(&self, x: usize) -> u64 {
        self.visits[x]
    }

    /// `T^a_x`.
    pub fn action_visits(&self, x: usize, a: usize) -> u64 {
        self.action_visits[x][a]
    }

    /// `[T^a_{x,y}]_y`.
    pub fn transition_counts(&self, x: usize, a: usize) -> &[u64] {
        &self.transition_counts[x][a]
    }

    /// Completed transitions.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0 && self.visits.iter().all(|&v| v == 0)
    }

    /// Marks entry into the initial state of a trajectory.
    pub fn enter(&mut self, x: usize) -> Result<()> {
        self.check_state(x)?;
        self.visits[x] += 1;
        Ok(())
    }

    /// Records the transition `x --a--> y`: bumps `T^a_{x,y}`, `T^a_x`, the
    /// successor's visit count and the round counter.
    pub fn record_transition(&mut self, x: usize, a: usize, y: usize) -> Result<()> {
        self.check_state(x)?;
        self.check_state(y)?;
        if a >= self.action_visits[x].len() {
            return Err(Error::OutOfRange {
                what: "action",
                index: a,
                bound: self.action_visits[x].len(),
            });
        }
        self.transition_counts[x][a][y] += 1;
        self.action_visits[x][a] += 1;
        self.visits[y] += 1;
        self.t += 1;
        Ok(())
    }

    /// Overwrites the counters of `(x, a)` with `row`, keeping `T^a_x` and
    /// `T_x` consistent (`T_x = Σ_a T^a_x`) and `t` equal to the number of
    /// preloaded transitions.
    pub(crate) fn preload(&mut self, x: usize, a: usize, row: &[u64]) {
        let old: u64 = self.transition_counts[x][a].iter().sum();
        let new: u64 = row.iter().sum();
        self.transition_counts[x][a].copy_from_slice(row);
        self.action_visits[x][a] = new;
        self.visits[x] = self.visits[x] - old + new;
        self.t = self.t - old + new;
    }

    pub fn snapshot(&self) -> CountSnapshot {
        CountSnapshot {
            visits: self.visits.clone(),
            action_visits: self.action_visits.clone(),
            transition_counts: self.transition_counts.clone(),
        }
    }

    /// Rebuilds a table from a snapshot. `t` becomes the total number of
    /// recorded transitions.
    pub fn from_snapshot(snap: CountSnapshot) -> Result<Self> {
        let n_states = snap.visits.len();
        if snap.action_visits.len() != n_states || snap.transition_counts.len() != n_states {
            return Err(Error::Ragged("snapshot tables disagree on state count".into()));
        }
        for x in 0..n_states {
            if snap.transition_counts[x].len() != snap.action_visits[x].len() {
                return Err(Error::Ragged(format!("snapshot state {x}: action count mismatch")));
            }
            for (a, row) in snap.transition_counts[x].iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::Ragged(format!("snapshot row ({x}, {a}) has wrong length")));
                }
                if row.iter().sum::<u64>() != snap.action_visits[x][a] {
                    return Err(Error::InvalidArgument(format!(
                        "snapshot row ({x}, {a}) does not sum to its action count"
                    )));
                }
            }
        }
        let t = snap.action_visits.iter().flatten().sum();
        Ok(Self {
            n_states,
            visits: snap.visits,
            action_visits: snap.action_visits,
            transition_counts: snap.transition_counts,
            t,
        })
    }

    fn check_state(&self, x: usize) -> Result<()> {
        if x >= self.n_states {
            return Err(Error::OutOfRange {
                what: "state",
                index: x,
                bound: self.n_states,
            });
        }
        Ok(())
    }
}

/// `p̂_y = (T^a_{x,y} + 1) / (T^a_x + |S|)`, strictly positive by construction.
pub fn estimated_transitions(counts: &CountTable, x: usize, a: usize) -> Vec<f64> {
    smoothed(counts.transition_counts(x, a))
}

pub(crate) fn smoothed(row: &[u64]) -> Vec<f64> {
    let denom = (row.iter().sum::<u64>() + row.len() as u64) as f64;
    let mut p: Vec<f64> = row.iter().map(|&c| (c + 1) as f64 / denom).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|e| *e /= sum);
    p
}

/// Actions in `x` tried at least `(ln T_x)²` times, or every action when
/// none qualifies.
pub fn good_action_set(counts: &CountTable, x: usize) -> Vec<usize> {
    let n_actions = counts.n_actions(x);
    let visits = counts.visits(x);
    if visits == 0 {
        return (0..n_actions).collect();
    }
    let threshold = (visits as f64).ln().powi(2);
    let good: Vec<usize> = (0..n_actions)
        .filter(|&a| counts.action_visits(x, a) as f64 >= threshold)
        .collect();
    if good.is_empty() {
        (0..n_actions).collect()
    } else {
        good
    }
}

/// Point estimate of the whole transition law, rewards copied from `mdp`.
pub fn estimated_mdp(counts: &CountTable, mdp: &Mdp) -> Mdp {
    let n = mdp.n_states();
    let transitions = (0..n)
        .map(|x| {
            (0..mdp.n_actions(x))
                .map(|a| estimated_transitions(counts, x, a))
                .collect()
        })
        .collect();
    Mdp::from_parts_unchecked(n, mdp.actions().to_vec(), mdp.rewards().to_vec(), transitions)
}
