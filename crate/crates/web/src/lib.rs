//! WebAssembly bindings for the demo page in `www/`.
//!
//! The `*_impl` functions hold the logic and run natively in tests; the
//! exported wrappers only convert errors for JavaScript.

use mdplab::agents::AgentKind;
use mdplab::estimation::CountTable;
use mdplab::mdp::{solve_optimality_all, Mdp};
use mdplab::sim::{replicate, rig_counts, Scenario};
use mdplab::solvers::{b_value, c_value_fast, d_value_fast, SolverConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Keeps a single call under a few seconds in the browser.
pub const MAX_WORK: usize = 2_000_000;

fn normalize(weights: &[f64]) -> Result<Vec<f64>, String> {
    if weights.len() < 2 {
        return Err("need at least two states".into());
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err("weights must be positive".into());
    }
    let total: f64 = weights.iter().sum();
    Ok(weights.iter().map(|w| w / total).collect())
}

fn check_v(v: &[f64], n: usize) -> Result<(), String> {
    if v.len() != n {
        return Err(format!("v has {} entries, p has {n}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err("v must be finite".into());
    }
    Ok(())
}

/// Rows of `(δ, C(p, v, δ), B(p, v, δ))` on `points` radii in `[0, delta_max]`,
/// flattened. `weights` is normalized to a distribution first.
pub fn index_curves_impl(weights: &[f64], v: &[f64], delta_max: f64, points: usize) -> Result<Vec<f64>, String> {
    let p = normalize(weights)?;
    check_v(v, p.len())?;
    if !(delta_max > 0.0 && delta_max.is_finite()) || points < 2 {
        return Err("need delta_max > 0 and at least two points".into());
    }
    let cfg = SolverConfig::default();
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let delta = delta_max * i as f64 / (points - 1) as f64;
        let c = c_value_fast(&p, v, delta, &cfg).map_err(|e| e.to_string())?;
        let b = b_value(&p, v, delta).map_err(|e| e.to_string())?;
        out.extend([delta, c.value, b.value]);
    }
    Ok(out)
}

/// Rows of `(ρ, D(p, v, ρ))` on `points` levels spread over `[μ_p, V)`,
/// flattened. Empty when `v` is constant.
pub fn dmed_curve_impl(weights: &[f64], v: &[f64], points: usize) -> Result<Vec<f64>, String> {
    let p = normalize(weights)?;
    check_v(v, p.len())?;
    if points < 2 {
        return Err("need at least two points".into());
    }
    let mean: f64 = p.iter().zip(v).map(|(a, b)| a * b).sum();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max - mean <= 1e-12 {
        return Ok(Vec::new());
    }
    let cfg = SolverConfig::default();
    let mut out = Vec::with_capacity(2 * points);
    for i in 0..points {
        // Stop short of V, where D blows up.
        let rho = mean + (max - mean) * i as f64 / points as f64;
        let d = d_value_fast(&p, v, rho, &cfg).map_err(|e| e.to_string())?;
        out.extend([rho, d.value]);
    }
    Ok(out)
}

/// Mean regret curve of `algorithm` on the example model followed by the
/// 95% half-widths: `2 * horizon` numbers.
pub fn regret_curve_impl(
    algorithm: &str,
    horizon: usize,
    replications: usize,
    seed: u64,
    rigged: bool,
) -> Result<Vec<f64>, String> {
    let kind: AgentKind = algorithm.parse().map_err(|e: mdplab::Error| e.to_string())?;
    if horizon == 0 || replications == 0 {
        return Err("horizon and replications must be positive".into());
    }
    if horizon.saturating_mul(replications) > MAX_WORK {
        return Err(format!("horizon × replications is capped at {MAX_WORK} in the browser"));
    }
    let mdp = Mdp::example();
    let mut scenario = Scenario::new(mdp.clone(), kind, horizon, replications, seed);
    if rigged {
        scenario.rigged_counts = Some(rig_counts(CountTable::new(&mdp)).map_err(|e| e.to_string())?);
    }
    let summary = replicate(&scenario, None).map_err(|e| e.to_string())?;
    let mut out = summary.mean;
    out.extend(summary.ci_half_width);
    Ok(out)
}

/// Gain, bias and optimal actions of a model given as JSON, or of the
/// built-in example when `model` is blank.
pub fn solve_impl(model: &str) -> Result<String, String> {
    let mdp = if model.trim().is_empty() {
        Mdp::example()
    } else {
        Mdp::from_json_str(model).map_err(|e| e.to_string())?
    };
    let gb = solve_optimality_all(&mdp).map_err(|e| e.to_string())?;
    let policy: Vec<String> = gb.optimal_actions.iter().map(|o| format!("a{}", o[0] + 1)).collect();
    let out = json!({
        "gain": gb.gain,
        "bias": gb.bias,
        "optimal_actions": gb.optimal_actions,
        "policy": policy,
    });
    serde_json::to_string_pretty(&out).map_err(|e| e.to_string())
}

/// The built-in example model as JSON.
#[wasm_bindgen]
pub fn example_model() -> String {
    serde_json::to_string_pretty(&Mdp::example().to_file()).unwrap_or_default()
}

#[wasm_bindgen]
pub fn index_curves(weights: &[f64], v: &[f64], delta_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    index_curves_impl(weights, v, delta_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn dmed_curve(weights: &[f64], v: &[f64], points: usize) -> Result<Vec<f64>, JsError> {
    dmed_curve_impl(weights, v, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn regret_curve(
    algorithm: &str,
    horizon: usize,
    replications: usize,
    seed: u64,
    rigged: bool,
) -> Result<Vec<f64>, JsError> {
    regret_curve_impl(algorithm, horizon, replications, seed, rigged).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solve(model: &str) -> Result<String, JsError> {
    solve_impl(model).map_err(|e| JsError::new(&e))
}
