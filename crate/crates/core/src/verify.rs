//! Self-checks behind `mdplab verify`: solver cross-checks, closed forms,
//! degenerate cases, the L1 index against a linear program, the example
//! model's policy, a speed comparison and schedule-independence of the
//! simulator. The long regret experiments live in the acceptance tests.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agents::AgentKind;
use crate::bench::{gen_random_instance, BenchConfig, Formulation};
use crate::error::Result;
use crate::lp::olp_linear_program;
use crate::mdp::{dot, kl_divergence, solve_optimality_all, Mdp};
use crate::sim::{run_all, Scenario};
use crate::solvers::{
    b_value, c_value_fast, c_value_reference, d_value_fast, d_value_reference, DmedStatus, SolverConfig, UcbStatus,
};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Runs every check; individual failures are reported, not returned as
/// errors.
pub fn run_verify(seed: u64) -> Vec<Check> {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        example_policy(),
        degenerate_cases(&mut rng, &cfg),
        cross_checks(&mut rng, &cfg),
        olp_against_lp(&mut rng),
        closed_forms(&cfg),
        relative_speed(seed, &cfg),
        schedule_independence(seed),
    ]
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> Check {
    check(name, false, format!("error: {e}"))
}

/// Average reward of the example model by undiscounted value iteration:
/// `V_{n+1} - V_n` converges to the gain for aperiodic unichain models.
fn value_iteration_gain(mdp: &Mdp) -> f64 {
    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    let mut gain = 0.0;
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..n)
            .map(|x| {
                (0..mdp.n_actions(x))
                    .map(|a| mdp.reward(x, a) + dot(mdp.row(x, a), &v))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let diffs: Vec<f64> = next.iter().zip(&v).map(|(a, b)| a - b).collect();
        let lo = diffs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        gain = 0.5 * (lo + hi);
        let base = next[0];
        v = next.iter().map(|e| e - base).collect();
        if hi - lo < 1e-13 {
            break;
        }
    }
    gain
}

fn example_policy() -> Check {
    const NAME: &str = "example model: optimal policy (a1, a2, a1) and gain";
    let mdp = Mdp::example();
    match solve_optimality_all(&mdp) {
        Ok(gb) => {
            let oracle = value_iteration_gain(&mdp);
            let ok = gb.optimal_actions == vec![vec![0], vec![1], vec![0]] && (gb.gain - oracle).abs() <= 1e-8;
            check(
                NAME,
                ok,
                format!(
                    "actions {:?}, gain {:.12} vs oracle {:.12}",
                    gb.optimal_actions, gb.gain, oracle
                ),
            )
        }
        Err(e) => failed(NAME, e),
    }
}

fn degenerate_cases<R: Rng>(rng: &mut R, cfg: &SolverConfig) -> Check {
    const NAME: &str = "degenerate cases of C and D";
    let mut bad = 0;
    let mut total = 0;
    let mut tally = |ok: Result<bool>| {
        total += 1;
        if !matches!(ok, Ok(true)) {
            bad += 1;
        }
    };
    for _ in 0..1000 {
        let n = rng.random_range(2..=10);
        let inst = match gen_random_instance(n, rng) {
            Ok(i) => i,
            Err(e) => return failed(NAME, e),
        };
        let (p, v) = (&inst.p, &inst.v);
        let mean = dot(p, v);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let c = rng.random_range(-5.0..5.0);
        let flat = vec![c; n];
        tally(
            c_value_fast(p, v, -rng.random_range(1e-6..1.0), cfg)
                .map(|s| s.status == UcbStatus::Infeasible && s.value == f64::NEG_INFINITY),
        );
        tally(c_value_fast(p, v, 0.0, cfg).map(|s| s.status == UcbStatus::AtCenter && s.value == mean));
        tally(c_value_fast(p, &flat, inst.delta, cfg).map(|s| s.status == UcbStatus::ConstantV && s.value == c));
        tally(
            d_value_fast(p, v, max + rng.random_range(1e-6..1.0), cfg)
                .map(|s| s.status == DmedStatus::Infeasible && s.value == f64::INFINITY),
        );
        tally(d_value_fast(p, v, max, cfg).map(|s| s.status == DmedStatus::Infeasible && s.value == f64::INFINITY));
        tally(
            d_value_fast(p, v, mean - rng.random_range(0.0..1.0), cfg)
                .map(|s| s.status == DmedStatus::Zero && s.value == 0.0),
        );
    }
    check(NAME, bad == 0, format!("{} of {total} cases wrong", bad))
}

fn cross_checks<R: Rng>(rng: &mut R, cfg: &SolverConfig) -> Check {
    const NAME: &str = "fast vs full-vector solvers (C and D) and constraint activity";
    let mut worst_c: f64 = 0.0;
    let mut worst_d: f64 = 0.0;
    let mut worst_kl: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    for n in [3, 5, 10] {
        for _ in 0..100 {
            let inst = match gen_random_instance(n, rng) {
                Ok(i) => i,
                Err(e) => return failed(NAME, e),
            };
            let run = || -> Result<(f64, f64, f64, f64)> {
                let c = c_value_fast(&inst.p, &inst.v, inst.delta, cfg)?;
                let c_ref = c_value_reference(&inst.p, &inst.v, inst.delta, cfg)?;
                let d = d_value_fast(&inst.p, &inst.v, inst.rho, cfg)?;
                let d_ref = d_value_reference(&inst.p, &inst.v, inst.rho, cfg)?;
                let q = c.optimizer.unwrap_or_default();
                let kl = kl_divergence(&inst.p, &q)?;
                let qd = d.optimizer.unwrap_or_default();
                Ok((
                    (c.value - c_ref).abs(),
                    (d.value - d_ref).abs(),
                    (kl - inst.delta).abs(),
                    (dot(&qd, &inst.v) - inst.rho).abs(),
                ))
            };
            match run() {
                Ok((a, b, c, d)) => {
                    worst_c = worst_c.max(a);
                    worst_d = worst_d.max(b);
                    worst_kl = worst_kl.max(c);
                    worst_mean = worst_mean.max(d);
                }
                Err(e) => return failed(NAME, e),
            }
        }
    }
    let ok = worst_c <= cfg.cross_check_tol && worst_d <= cfg.cross_check_tol && worst_kl <= 1e-8 && worst_mean <= 1e-8;
    check(
        NAME,
        ok,
        format!("max |ΔC| {worst_c:.2e}, |ΔD| {worst_d:.2e}, |KL - δ| {worst_kl:.2e}, |mean - ρ| {worst_mean:.2e}"),
    )
}

fn olp_against_lp<R: Rng>(rng: &mut R) -> Check {
    const NAME: &str = "L1 index matches its linear program";
    let mut worst: f64 = 0.0;
    for (n, count) in [(3, 500), (5, 100), (10, 100)] {
        for _ in 0..count {
            let inst = match gen_random_instance(n, rng) {
                Ok(i) => i,
                Err(e) => return failed(NAME, e),
            };
            let delta = rng.random_range(0.0..2.5);
            match (
                b_value(&inst.p, &inst.v, delta),
                olp_linear_program(&inst.p, &inst.v, delta),
            ) {
                (Ok(b), Ok(lp)) => worst = worst.max((b.value - lp.value).abs()),
                (Err(e), _) | (_, Err(e)) => return failed(NAME, e),
            }
        }
    }
    check(NAME, worst <= 1e-9, format!("max |B - LP| {worst:.2e}"))
}

fn closed_forms(cfg: &SolverConfig) -> Check {
    const NAME: &str = "two-state closed forms";
    let delta: f64 = 0.125;
    let q = 0.5 * (1.0 + (1.0 - (-2.0 * delta).exp()).sqrt());
    let run = || -> Result<(bool, f64, f64)> {
        let c = c_value_fast(&[0.5, 0.5], &[0.0, 1.0], delta, cfg)?;
        let d = d_value_fast(&[0.5, 0.5], &[0.0, 1.0], 0.7, cfg)?;
        let dq = d.optimizer.unwrap_or_default();
        let ok = (c.value - q).abs() <= 1e-6
            && (c.value - 0.735160).abs() <= 1e-6
            && (d.lambda.unwrap_or(f64::NAN) - 0.4 / 0.42).abs() <= 1e-6
            && (d.value - 0.087177).abs() <= 1e-6
            && dq.len() == 2
            && (dq[0] - 0.3).abs() <= 1e-6
            && (dq[1] - 0.7).abs() <= 1e-6;
        Ok((ok, c.value, d.value))
    };
    match run() {
        Ok((ok, c, d)) => check(NAME, ok, format!("C = {c:.9} (closed form {q:.9}), D = {d:.9}")),
        Err(e) => failed(NAME, e),
    }
}

fn relative_speed(seed: u64, cfg: &SolverConfig) -> Check {
    const NAME: &str = "fast formulations ≥ 10× faster at |S| = 1000, < 1 s at |S| = 10000";
    let bench = BenchConfig {
        dims: vec![1000],
        trials: 3,
        reference_dim_cap: 1000,
        seed,
        solver: *cfg,
    };
    let selected = [
        Formulation::DmedLambda,
        Formulation::UcbMuLambda,
        Formulation::DmedQ,
        Formulation::UcbQ,
    ];
    let records = match crate::bench::time_selected(&bench, &selected) {
        Ok(r) => r,
        Err(e) => return failed(NAME, e),
    };
    let summary = crate::bench::summarize(&records);
    let mean = |f: Formulation| {
        summary
            .iter()
            .find(|s| s.formulation == f)
            .map(|s| s.mean_wall_time_s)
            .unwrap_or(f64::NAN)
    };
    let ucb = mean(Formulation::UcbQ) / mean(Formulation::UcbMuLambda);
    let dmed = mean(Formulation::DmedQ) / mean(Formulation::DmedLambda);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big = match gen_random_instance(10_000, &mut rng) {
        Ok(i) => i,
        Err(e) => return failed(NAME, e),
    };
    let start = Instant::now();
    let big_c = c_value_fast(&big.p, &big.v, big.delta, cfg);
    let c_time = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let big_d = d_value_fast(&big.p, &big.v, big.rho, cfg);
    let d_time = start.elapsed().as_secs_f64();
    let ok = ucb >= 10.0 && dmed >= 10.0 && big_c.is_ok() && big_d.is_ok() && c_time < 1.0 && d_time < 1.0;
    check(
        NAME,
        ok,
        format!("speedups UCB {ucb:.0}×, DMED {dmed:.0}×; |S| = 10000: C {c_time:.2e} s, D {d_time:.2e} s"),
    )
}

fn schedule_independence(seed: u64) -> Check {
    const NAME: &str = "simulation output independent of thread count";
    let scenario = Scenario::new(Mdp::example(), AgentKind::MdpPs, 300, 8, seed);
    let one = run_all(&scenario, Some(1));
    let many = run_all(&scenario, Some(4));
    match (one, many) {
        (Ok(a), Ok(b)) => check(NAME, a == b, format!("{} replications compared", a.len())),
        (Err(e), _) | (_, Err(e)) => failed(NAME, e),
    }
}
