//! Browser bindings. Each export takes and returns JSON so the page can stay
//! plain JavaScript; the `*_json` functions are the same operations for native
//! callers and tests.

use serde::Serialize;
use splitlab::experiment::ExperimentConfig;
use splitlab::order::{global_order, local_order};
use splitlab::reference::{reference_solve, wave_exact};
use splitlab::{split_solve, OrderKind, ReferenceSpec};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Profiles {
    x: Vec<f64>,
    split: Vec<f64>,
    reference: Vec<f64>,
    max_error: f64,
    tau: f64,
    scheme: String,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Split solution and reference at the horizon for one macro step `tau`.
pub fn simulate_json(request: &str) -> Result<String, String> {
    // a config object plus a `tau` field
    let mut value: serde_json::Value = serde_json::from_str(request).map_err(err)?;
    let tau = value
        .as_object_mut()
        .and_then(|o| o.remove("tau"))
        .and_then(|t| t.as_f64())
        .filter(|t| *t > 0.0)
        .ok_or("`tau` must be a positive number")?;
    let c = &serde_json::from_value::<ExperimentConfig>(value).map_err(err)?;
    let setup = c.setup().map_err(err)?;
    let split = split_solve(&setup.scheme, &setup.problem, &setup.initial, c.horizon, tau).map_err(err)?;
    let reference = reference_solve(
        &c.reference_problem().map_err(err)?,
        &setup.initial,
        c.horizon,
        &ReferenceSpec::with_step(c.reference_step),
    )
    .map_err(err)?;
    let max_error = splitlab::max_norm_diff(&split, &reference).map_err(err)?;
    let out = Profiles {
        x: setup.initial.grid.nodes().collect(),
        split: split.values,
        reference: reference.values,
        max_error,
        tau,
        scheme: setup.scheme.to_string(),
    };
    serde_json::to_string(&out).map_err(err)
}

/// Errors, pairwise ratios and fitted order over the configured ladder.
pub fn order_series_json(config: &str) -> Result<String, String> {
    let c: ExperimentConfig = serde_json::from_str(config).map_err(err)?;
    let setup = c.setup().map_err(err)?;
    let estimate = match c.order {
        OrderKind::Local => local_order(&setup.scheme, &setup.problem, &setup.initial, &setup.ladder, &setup.reference),
        OrderKind::Global => {
            let reference = reference_solve(
                &c.reference_problem().map_err(err)?,
                &setup.initial,
                c.horizon,
                &setup.reference,
            )
            .map_err(err)?;
            global_order(&setup.scheme, &setup.problem, &setup.initial, &setup.ladder, c.horizon, &reference)
        }
    }
    .map_err(err)?;
    serde_json::to_string(&estimate).map_err(err)
}

#[derive(Serialize)]
struct WaveProfile {
    x: Vec<f64>,
    u: Vec<f64>,
}

/// Exact traveling wave sampled on `n` points of `[x_min, x_max]` at time `t`.
pub fn wave_profile_json(x_min: f64, x_max: f64, n: usize, t: f64, k: f64) -> Result<String, String> {
    if n < 2 || !(x_max > x_min) {
        return Err("need n >= 2 and x_max > x_min".into());
    }
    let x: Vec<f64> = (0..n).map(|i| x_min + (x_max - x_min) * i as f64 / (n - 1) as f64).collect();
    let u = x.iter().map(|&xi| wave_exact(xi, t, k, 1.0)).collect();
    serde_json::to_string(&WaveProfile { x, u }).map_err(err)
}

/// Default configuration as JSON, for the page to start from.
#[wasm_bindgen]
pub fn default_config() -> String {
    serde_json::to_string(&ExperimentConfig::default()).expect("serializable")
}

#[wasm_bindgen]
pub fn simulate(request: &str) -> Result<String, JsValue> {
    simulate_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn order_series(config: &str) -> Result<String, JsValue> {
    order_series_json(config).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn wave_profile(x_min: f64, x_max: f64, n: usize, t: f64, k: f64) -> Result<String, JsValue> {
    wave_profile_json(x_min, x_max, n, t, k).map_err(|e| JsValue::from_str(&e))
}
