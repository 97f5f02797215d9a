//! Wall-clock comparison of the index formulations on random instances.
//!
//! Every formulation is timed on the same instance for a given dimension and
//! trial, so fast and reference results can be compared pairwise.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::dot;
use crate::sim::{csv_error, Z_95};
use crate::solvers::{
    b_value, c_value_fast, c_value_reference, d_value_fast, d_value_reference, dirichlet_sample, SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Formulation {
    /// One Dirichlet draw and its value `Σ Q_y v_y`.
    PsSample,
    /// One-unknown DMED solve.
    DmedLambda,
    /// Two-unknown UCB solve.
    UcbMuLambda,
    /// DMED over the full probability vector.
    DmedQ,
    /// UCB over the full probability vector.
    UcbQ,
    /// L1 index.
    OlpLp,
}

impl Formulation {
    pub const ALL: [Formulation; 6] = [
        Self::PsSample,
        Self::DmedLambda,
        Self::UcbMuLambda,
        Self::DmedQ,
        Self::UcbQ,
        Self::OlpLp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::PsSample => "PS-sample",
            Self::DmedLambda => "DMED-λ",
            Self::UcbMuLambda => "UCB-(μ,λ)",
            Self::DmedQ => "DMED-q",
            Self::UcbQ => "UCB-q",
            Self::OlpLp => "OLP-LP",
        }
    }

    /// Full-vector formulations, subject to the dimension cap.
    pub fn is_reference(self) -> bool {
        matches!(self, Self::DmedQ | Self::UcbQ)
    }

    /// The fast counterpart of a reference formulation.
    pub fn fast_counterpart(self) -> Option<Formulation> {
        match self {
            Self::DmedQ => Some(Self::DmedLambda),
            Self::UcbQ => Some(Self::UcbMuLambda),
            _ => None,
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown formulation `{s}`")))
    }
}

/// Inputs shared by every formulation for one `(dimension, trial)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub delta: f64,
    pub rho: f64,
    pub alpha: Vec<f64>,
}

/// `p ~ Dir(1, …, 1)`, `v ~ U[0, 1]`, `δ ~ U[0.01, 1]`, `ρ ~ U(μ_p, V)` and
/// integer Dirichlet parameters uniform on `1..=100`.
pub fn gen_random_instance<R: Rng + ?Sized>(n_states: usize, rng: &mut R) -> Result<Instance> {
    if n_states < 2 {
        return Err(Error::InvalidArgument("instances need at least 2 states".into()));
    }
    let p = dirichlet_sample(&vec![1.0; n_states], rng)?;
    let v: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>()).collect();
    let delta = rng.random_range(0.01..=1.0);
    let mean = dot(&p, &v);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rho = loop {
        let rho = rng.random_range(mean..max);
        if rho > mean {
            break rho;
        }
    };
    let alpha = (0..n_states).map(|_| rng.random_range(1..=100u32) as f64).collect();
    Ok(Instance {
        p,
        v,
        delta,
        rho,
        alpha,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    pub trials: usize,
    /// Reference formulations are skipped above this dimension.
    pub reference_dim_cap: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dims: vec![10, 100, 1000, 10_000],
            trials: 15,
            reference_dim_cap: 1000,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RecordStatus {
    Ok,
    Skipped,
    Failed,
}

impl RecordStatus {
    pub fn label(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Skipped => "skipped",
            Self::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub formulation: Formulation,
    pub n_states: usize,
    pub trial: usize,
    /// Seconds of solver work; `None` when skipped.
    pub wall_time_s: Option<f64>,
    pub value: Option<f64>,
    pub status: RecordStatus,
}

fn evaluate(f: Formulation, inst: &Instance, rng: &mut ChaCha8Rng, cfg: &SolverConfig) -> Result<f64> {
    match f {
        Formulation::PsSample => Ok(dot(&dirichlet_sample(&inst.alpha, rng)?, &inst.v)),
        Formulation::DmedLambda => Ok(d_value_fast(&inst.p, &inst.v, inst.rho, cfg)?.value),
        Formulation::UcbMuLambda => Ok(c_value_fast(&inst.p, &inst.v, inst.delta, cfg)?.value),
        Formulation::DmedQ => d_value_reference(&inst.p, &inst.v, inst.rho, cfg),
        Formulation::UcbQ => c_value_reference(&inst.p, &inst.v, inst.delta, cfg),
        Formulation::OlpLp => Ok(b_value(&inst.p, &inst.v, inst.delta)?.value),
    }
}

/// Deterministic instance stream of one dimension.
pub fn instances(n_states: usize, trials: usize, seed: u64) -> Result<Vec<Instance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n_states as u64).rotate_left(32));
    (0..trials).map(|_| gen_random_instance(n_states, &mut rng)).collect()
}

/// Times every formulation on `trials` shared instances per dimension.
/// Instance generation is excluded from the timings, and one untimed
/// warm-up solve per `(formulation, dimension)` precedes the measured ones.
/// Solver failures become `Failed` records.
pub fn time_formulations(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    time_selected(cfg, &Formulation::ALL)
}

/// [`time_formulations`] restricted to `formulations`.
pub fn time_selected(cfg: &BenchConfig, formulations: &[Formulation]) -> Result<Vec<BenchRecord>> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    cfg.solver.validate()?;
    let mut records = Vec::new();
    for &n in &cfg.dims {
        let batch = instances(n, cfg.trials, cfg.seed)?;
        let mut sample_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for &f in formulations {
            if f.is_reference() && n > cfg.reference_dim_cap {
                records.extend((0..cfg.trials).map(|trial| BenchRecord {
                    formulation: f,
                    n_states: n,
                    trial,
                    wall_time_s: None,
                    value: None,
                    status: RecordStatus::Skipped,
                }));
                continue;
            }
            let _ = evaluate(f, &batch[0], &mut sample_rng, &cfg.solver);
            for (trial, inst) in batch.iter().enumerate() {
                let start = Instant::now();
                let out = evaluate(f, inst, &mut sample_rng, &cfg.solver);
                let elapsed = start.elapsed().as_secs_f64();
                let (value, status) = match out {
                    Ok(v) => (Some(v), RecordStatus::Ok),
                    Err(_) => (None, RecordStatus::Failed),
                };
                records.push(BenchRecord {
                    formulation: f,
                    n_states: n,
                    trial,
                    wall_time_s: Some(elapsed),
                    value,
                    status,
                });
            }
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub formulation: Formulation,
    pub n_states: usize,
    pub timed: usize,
    pub mean_wall_time_s: f64,
    pub ci_half_width_s: f64,
}

/// Mean wall time with a normal 95% interval per `(formulation, dimension)`
/// over the records that ran. Groups without timed records are omitted.
pub fn summarize(records: &[BenchRecord]) -> Vec<BenchSummary> {
    let mut keys: Vec<(Formulation, usize)> = records.iter().map(|r| (r.formulation, r.n_states)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter_map(|(f, n)| {
            let times: Vec<f64> = records
                .iter()
                .filter(|r| r.formulation == f && r.n_states == n && r.status == RecordStatus::Ok)
                .filter_map(|r| r.wall_time_s)
                .collect();
            if times.is_empty() {
                return None;
            }
            let k = times.len() as f64;
            let mean = times.iter().sum::<f64>() / k;
            let half = if times.len() > 1 {
                let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1.0);
                Z_95 * (var / k).sqrt()
            } else {
                0.0
            };
            Some(BenchSummary {
                formulation: f,
                n_states: n,
                timed: times.len(),
                mean_wall_time_s: mean,
                ci_half_width_s: half,
            })
        })
        .collect()
}

/// `(reference formulation, n_states, trial, |fast - reference|)` for every
/// pair where both sides produced a value.
pub fn cross_check(records: &[BenchRecord]) -> Vec<(Formulation, usize, usize, f64)> {
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.formulation.is_reference()) {
        let (Some(fast), Some(slow)) = (r.formulation.fast_counterpart(), r.value) else {
            continue;
        };
        let paired = records
            .iter()
            .find(|o| o.formulation == fast && o.n_states == r.n_states && o.trial == r.trial);
        if let Some(value) = paired.and_then(|o| o.value) {
            out.push((r.formulation, r.n_states, r.trial, (value - slow).abs()));
        }
    }
    out
}

/// CSV `formulation,n_states,trial,wall_time_s,value,status`.
pub fn write_records_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["formulation", "n_states", "trial", "wall_time_s", "value", "status"])
        .map_err(csv_error)?;
    for r in records {
        w.serialize((
            r.formulation.label(),
            r.n_states,
            r.trial,
            r.wall_time_s,
            r.value,
            r.status.label(),
        ))
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// CSV `formulation,n_states,trials,mean_wall_time_s,ci_lower,ci_upper`.
pub fn write_summary_csv<W: Write>(summary: &[BenchSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "formulation",
        "n_states",
        "trials",
        "mean_wall_time_s",
        "ci_lower",
        "ci_upper",
    ])
    .map_err(csv_error)?;
    for s in summary {
        w.serialize((
            s.formulation.label(),
            s.n_states,
            s.timed,
            s.mean_wall_time_s,
            s.mean_wall_time_s - s.ci_half_width_s,
            s.mean_wall_time_s + s.ci_half_width_s,
        ))
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}
