//! Browser bindings: run a scenario, sample a Riemann fan, solve the turning-point interface.

use serde_json::json;
use wasm_bindgen::prelude::*;

use hughes_core::godunov::interface_state;
use hughes_core::{exact_lwr_riemann, parse_scenario, run_coupled, FluxModel};

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Runs a TOML scenario and returns cell centres, snapshots, the turning path and diagnostics as JSON.
#[wasm_bindgen]
pub fn simulate(scenario_toml: &str) -> Result<String, String> {
    let scenario = parse_scenario(scenario_toml).map_err(text)?;
    let run = run_coupled(&scenario).map_err(text)?;
    let grid = &run.output.grid;
    let centres: Vec<f64> = (0..grid.cell_count())
        .map(|j| 0.5 * (grid.node(j) + grid.node(j + 1)))
        .collect();
    let path = &run.output.path;
    let times: Vec<f64> = (0..path.xi.len()).map(|n| path.time(n)).collect();
    let snapshots: Vec<_> = run
        .output
        .snapshots
        .iter()
        .map(|s| json!({ "t": s.t, "rho": s.rho }))
        .collect();
    let out = json!({
        "x": centres,
        "snapshots": snapshots,
        "t": times,
        "xi": path.xi,
        "diagnostics": run.diagnostics,
    });
    Ok(out.to_string())
}

/// Exact solution of the quadratic-flux Riemann problem at time `t`, sampled at `points` evenly spaced abscissae.
#[wasm_bindgen]
pub fn riemann_profile(left: f64, right: f64, t: f64, from: f64, to: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 || to <= from || t <= 0.0 {
        return Err("need points >= 2, from < to and t > 0".into());
    }
    let sol = exact_lwr_riemann(left, right, &FluxModel::quadratic()).map_err(text)?;
    let h = (to - from) / (points - 1) as f64;
    Ok((0..points).map(|i| sol.eval(t, from + h * i as f64)).collect())
}

/// Intermediate state and conservative flux at a turning point moving with `slope`; returns `[k, flux]`.
#[wasm_bindgen]
pub fn interface_flux(rho_left: f64, rho_right: f64, slope: f64) -> Result<Vec<f64>, String> {
    let s = interface_state(&FluxModel::quadratic(), rho_left, rho_right, slope).map_err(text)?;
    Ok(vec![s.k, s.flux])
}
