//! WebAssembly bindings behind `www/index.html`. Every export returns a JSON
//! string; errors come back as `{"error": "..."}`.

use rbsde::model::{GeneratorSpec, ObstacleSpec, SdeCoeffs, TimeGrid};
use rbsde::representation::{corollary34_config, representation_sweep, RepBackend};
use rbsde::solvers::{penalty_sweep, solve_tree, Backend, RbsdeProblem, SchemeOptions, Terminal};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(r: Result<Value, rbsde::Error>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e.to_string() })).to_string()
}

/// American put on a log-price tree.
pub fn put_json(strike: f64, spot: f64, rate: f64, vol: f64, maturity: f64, steps: usize) -> Result<Value, rbsde::Error> {
    let prob = RbsdeProblem::new(
        GeneratorSpec::discount(rate),
        Terminal::put_on_log(strike),
        ObstacleSpec::put_on_log(strike),
        SdeCoeffs::gbm_log(rate, vol),
        TimeGrid::uniform(0.0, maturity, steps)?,
        vec![spot.ln()],
    )?;
    let american = solve_tree(&prob, SchemeOptions::default())?;
    let european = rbsde::solvers::solve_tree_unreflected(&prob, SchemeOptions::default())?;
    Ok(json!({
        "american": american.origin_y(),
        "european": european.origin_y(),
        "expected_k": american.expected_k_total(),
    }))
}

#[wasm_bindgen]
pub fn american_put(strike: f64, spot: f64, rate: f64, vol: f64, maturity: f64, steps: usize) -> String {
    respond(put_json(strike, spot, rate, vol, maturity, steps))
}

fn generator(id: &str) -> Result<GeneratorSpec, rbsde::Error> {
    Ok(match id {
        "zero" => GeneratorSpec::zero(),
        "abs-z" => GeneratorSpec::abs_z(),
        "sqrt-cap" => GeneratorSpec::sqrt_cap(),
        "linear" => GeneratorSpec::linear(0.5, vec![0.3], 0.2),
        other => return Err(rbsde::Error::Precondition(format!("unknown generator {other}"))),
    })
}

/// Difference quotients over the default schedule, on short trees.
pub fn sweep_json(gen: &str, z: f64, eta: f64, level: f64) -> Result<Value, rbsde::Error> {
    let mut inst = corollary34_config(generator(gen)?, ObstacleSpec::constant(level), vec![z], eta, 0.0, 1.0)?;
    inst.backend = RepBackend::Tree;
    let rep = representation_sweep(&inst)?;
    let rows: Vec<Value> = rep
        .rows
        .iter()
        .map(|r| json!({ "epsilon": r.epsilon, "estimate": r.estimate, "k_free": r.k_free_estimate, "k_term": r.k_term }))
        .collect();
    Ok(json!({ "target": rep.target, "verdict": format!("{:?}", rep.verdict), "slope": rep.loglog_slope, "rows": rows }))
}

#[wasm_bindgen]
pub fn representation(gen: &str, z: f64, eta: f64, level: f64) -> String {
    respond(sweep_json(gen, z, eta, level))
}

/// Penalized origin values against the reflected one for `L = l0 - t`,
/// `g = 0`, zero terminal value.
pub fn penalty_json(l0: f64, steps: usize, levels: &[f64]) -> Result<Value, rbsde::Error> {
    let prob = RbsdeProblem::new(
        GeneratorSpec::zero(),
        Terminal::constant(0.0),
        ObstacleSpec::linear_in_time(l0, -1.0),
        SdeCoeffs::brownian(1),
        TimeGrid::uniform(0.0, 1.0, steps)?,
        vec![0.0],
    )?;
    let s = penalty_sweep(&prob, Backend::Tree, levels, SchemeOptions::default())?;
    Ok(json!({ "n": s.n_values, "y0": s.y0, "reflected": s.reflected_y0, "monotone": s.monotone }))
}

#[wasm_bindgen]
pub fn penalty(l0: f64, steps: usize, levels: Vec<f64>) -> String {
    respond(penalty_json(l0, steps, &levels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exports_return_json() {
        let v: Value = serde_json::from_str(&american_put(100.0, 100.0, 0.06, 0.4, 0.5, 200)).unwrap();
        assert!(v["american"].as_f64().unwrap() >= v["european"].as_f64().unwrap());
        let v: Value = serde_json::from_str(&penalty(1.0, 100, vec![4.0, 16.0, 64.0])).unwrap();
        assert_eq!(v["monotone"], true);
        let v: Value = serde_json::from_str(&representation("nope", 1.0, 1.0, 0.0)).unwrap();
        assert!(v["error"].is_string());
    }

    #[test]
    fn tree_sweep_approaches_target() {
        let v = sweep_json("abs-z", 1.0, 1.0, -10.0).unwrap();
        let last = v["rows"].as_array().unwrap().last().unwrap()["estimate"].as_f64().unwrap();
        assert!((last - 1.0).abs() < 0.05, "{v}");
    }
}
