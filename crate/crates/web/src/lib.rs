//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers or comma-separated lists and returns a JSON
//! string; failures come back as `{"error": "..."}` so the page never has to
//! catch exceptions.

use robust_mfg::{
    initial_flow, lambda_sweep, make_crowd_game, solve_mfe, worst_case_expectation, AmbiguityInstance, CostMatrix,
    Distribution, FiniteSpace, SolveOptions, CROWD_C,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.split_once('/') {
            Some((p, q)) => {
                let (p, q): (f64, f64) = (
                    p.trim().parse().map_err(|_| format!("bad number `{s}`"))?,
                    q.trim().parse().map_err(|_| format!("bad number `{s}`"))?,
                );
                Ok(p / q)
            }
            None => s.parse().map_err(|_| format!("bad number `{s}`")),
        })
        .collect()
}

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn law(text: &str) -> Result<Distribution, String> {
    Distribution::normalized(list(text)?, robust_mfg::LOAD_SLACK).map_err(|e| e.to_string())
}

/// Equilibrium of the crowd game: value, flow and policy.
#[wasm_bindgen]
pub fn solve_crowd(lambda: f64, mu0: &str, horizon: u32) -> String {
    respond((|| {
        let game = make_crowd_game(lambda, CROWD_C, &law(mu0)?, horizon as usize).map_err(|e| e.to_string())?;
        let eq = solve_mfe(&game, &initial_flow(&game), &SolveOptions::default()).map_err(|e| e.to_string())?;
        let flow: Vec<&[f64]> = eq.flow.steps().iter().map(Distribution::weights).collect();
        let policy: Vec<Vec<&[f64]>> = eq
            .policy
            .rows()
            .iter()
            .map(|per_state| per_state.iter().map(Distribution::weights).collect())
            .collect();
        Ok(json!({
            "value": eq.value(),
            "converged": eq.converged,
            "mixed": eq.mixed,
            "iterations": eq.iterations,
            "flow": flow,
            "terminal": eq.terminal.weights(),
            "policy": policy,
        }))
    })())
}

/// `V(μ*)` across radii, for the value-versus-uncertainty curve.
#[wasm_bindgen]
pub fn sweep_crowd(lambdas: &str, mu0: &str, horizon: u32) -> String {
    respond((|| {
        let lambdas = list(lambdas)?;
        let mu0 = law(mu0)?;
        let table = lambda_sweep(
            |l| make_crowd_game(l, CROWD_C, &mu0, horizon as usize),
            &lambdas,
            None,
            &SolveOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        let rows: Vec<Value> = table
            .rows
            .iter()
            .map(|r| json!({ "lambda": r.lambda, "value": r.value, "converged": r.converged, "error": r.error }))
            .collect();
        Ok(json!({ "rows": rows }))
    })())
}

/// Worst-case law for payoff `f` within W1 distance `radius` of `center`,
/// with states at the points `coords` on a line.
#[wasm_bindgen]
pub fn worst_case(f: &str, center: &str, coords: &str, radius: f64) -> String {
    respond((|| {
        let (f, center, coords) = (list(f)?, law(center)?, list(coords)?);
        if f.len() != center.len() || coords.len() != center.len() {
            return Err("f, center and coords need the same length".into());
        }
        let cost = CostMatrix::from_space(&FiniteSpace::line(&coords).map_err(|e| e.to_string())?);
        let set = AmbiguityInstance::Ball {
            center: &center,
            radius,
            cost: &cost,
        };
        let sol = worst_case_expectation(&f, &set).map_err(|e| e.to_string())?;
        Ok(json!({
            "value": sol.value,
            "reference_value": center.dot(&f),
            "minimizer": sol.minimizer.weights(),
            "budget_used": sol.budget_used,
        }))
    })())
}
