//! Browser bindings for the bFCTL queue toolkit.
//!
//! Three operations back the demo page: an exact solve (per-slot means and
//! the overflow CDF), a capacity report, and a small Monte Carlo run. All
//! take the JSON configuration document used by the CLI and return JSON
//! strings; errors come back as `{"error": {...}}` rather than exceptions.

use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

fn err_json(kind: &str, message: String) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn load(config_json: &str) -> Result<bfctl::ValidatedModel, String> {
    let cfg = bfctl::parse_config(config_json).map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())
}

/// Exact steady-state analysis: per-slot means, overflow pmf/CDF up to
/// `nmax`, delay and throughput.
#[wasm_bindgen]
pub fn solve_queue(config_json: &str, nmax: usize) -> String {
    let model = match load(config_json) {
        Ok(m) => m,
        Err(e) => return err_json("InvalidConfig", e),
    };
    let solved = match bfctl::pgf::solve(&model) {
        Ok(s) => s,
        Err(e) => return err_json("Solve", e.to_string()),
    };
    let metrics = solved.metrics();
    let overflow = match solved.overflow_pmf(nmax) {
        Ok(p) => p,
        Err(e) => return err_json("Inversion", e.to_string()),
    };
    let cdf: Vec<f64> = overflow
        .weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    json!({
        "metrics": metrics,
        "overflow_pmf": overflow.weights,
        "overflow_cdf": cdf,
        "residual": solved.residual,
        "roots": solved.roots.iter().map(|g| json!([g.z.re, g.z.im])).collect::<Vec<_>>(),
    })
    .to_string()
}

/// Capacity, stability verdict and load ratio.
#[wasm_bindgen]
pub fn capacity_report(config_json: &str) -> String {
    let model = match load(config_json) {
        Ok(m) => m,
        Err(e) => return err_json("InvalidConfig", e),
    };
    let report = bfctl::check_stability(&model);
    serde_json::to_string(&report).unwrap()
}

/// Monte Carlo validation run (kept small for the browser).
#[wasm_bindgen]
pub fn simulate_queue(config_json: &str, cycles: usize, runs: usize, seed: u64) -> String {
    let model = match load(config_json) {
        Ok(m) => m,
        Err(e) => return err_json("InvalidConfig", e),
    };
    let cycles = cycles.clamp(100, 100_000);
    let runs = runs.clamp(2, 200);
    let report = bfctl::sim::simulate(&model, cycles, runs, seed);
    serde_json::to_string(&report).unwrap()
}
