//! Browser bindings. Each exported function takes plain numbers or strings
//! and returns a JSON document; `www/index.html` draws the results.
//!
//! The `*_json` functions are the wasm exports; the plain functions behind
//! them are what the native tests call.

use std::path::Path;

use evcharge::config::{Config, PolicyKind, Scenario};
use evcharge::run_horizon;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize, PartialEq)]
pub struct HeadroomPoint {
    pub epsilon: f64,
    pub headroom: f64,
}

/// Grid headroom `P - mean - std / sqrt(2 eps)` on a log grid of `eps`.
pub fn headroom_curve(capacity: f64, load_mean: f64, load_std: f64, points: usize) -> Vec<HeadroomPoint> {
    let points = points.max(2);
    let (lo, hi) = (1e-3f64.ln(), 0.5f64.ln());
    (0..points)
        .map(|k| {
            let epsilon = (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp();
            HeadroomPoint {
                epsilon,
                headroom: capacity - load_mean - load_std / (2.0 * epsilon).sqrt(),
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub v: f64,
    pub time_average_cost: f64,
    pub mean_queue_total: f64,
    pub steady_battery: f64,
}

#[derive(Debug, Serialize)]
pub struct Sweep {
    pub v_max: f64,
    pub greedy_cost: f64,
    pub points: Vec<SweepPoint>,
}

fn scenario(overrides: &str, horizon: usize, seed: u64) -> Result<Scenario, String> {
    let mut cfg = Config::default();
    cfg.run.horizon = horizon;
    cfg.run.seed = seed;
    for line in overrides.lines().map(str::trim).filter(|l| !l.is_empty()) {
        cfg.apply_override(line).map_err(|e| e.to_string())?;
    }
    Scenario::build(cfg, Path::new(".")).map_err(|e| e.to_string())
}

fn run(sc: &Scenario) -> Result<evcharge::RunReport, String> {
    run_horizon(&sc.net, &sc.init, &sc.trace, &sc.controller(), sc.config.run.tail_fraction)
        .map(|(r, _)| r)
        .map_err(|e| e.to_string())
}

/// Time-average cost of the default scenario at `points` values of V spread
/// over (0, V_max], plus the greedy baseline on the same inputs.
pub fn cost_vs_v(horizon: usize, seed: u64, points: usize) -> Result<Sweep, String> {
    let base = scenario("", horizon, seed)?;
    let v_max = base.consts.as_ref().map(|c| c.v_max).ok_or("no constants")?;
    let points = (1..=points.max(1))
        .map(|k| {
            let v = v_max * k as f64 / points.max(1) as f64;
            let sc = scenario(&format!("V={v}"), horizon, seed)?;
            let r = run(&sc)?;
            Ok(SweepPoint {
                v,
                time_average_cost: r.time_average_cost,
                mean_queue_total: r.mean_queue_total,
                steady_battery: r.steady_battery.iter().sum::<f64>() / r.steady_battery.len() as f64,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let greedy = scenario("policy=greedy", horizon, seed)?;
    Ok(Sweep {
        v_max,
        greedy_cost: run(&greedy)?.time_average_cost,
        points,
    })
}

#[derive(Debug, Serialize)]
pub struct Trajectory {
    pub policy: String,
    pub time_average_cost: f64,
    pub max_overload_frequency: f64,
    pub price: Vec<f64>,
    pub grid_total: Vec<f64>,
    pub queue_total: Vec<f64>,
    pub battery_mean: Vec<f64>,
    pub renewable_direct: Vec<f64>,
}

/// One run of the default scenario with `key=value` overrides, one per line.
pub fn simulate(overrides: &str, horizon: usize, seed: u64) -> Result<Trajectory, String> {
    let sc = scenario(overrides, horizon, seed)?;
    let r = run(&sc)?;
    let n = sc.net.fleet.len() as f64;
    Ok(Trajectory {
        policy: match sc.config.run.policy {
            PolicyKind::Proposed => "proposed".into(),
            PolicyKind::Greedy => "greedy".into(),
        },
        time_average_cost: r.time_average_cost,
        max_overload_frequency: r.max_overload_frequency(),
        price: r.records.iter().map(|s| s.price).collect(),
        grid_total: r.records.iter().map(|s| s.grid_draw.iter().sum()).collect(),
        queue_total: r.queue_trajectory(),
        battery_mean: r.records.iter().map(|s| s.batteries.iter().sum::<f64>() / n).collect(),
        renewable_direct: r.records.iter().map(|s| s.renewable_direct).collect(),
    })
}

fn to_js<T: Serialize>(v: Result<T, String>) -> Result<String, JsValue> {
    v.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = headroomCurve)]
pub fn headroom_curve_json(capacity: f64, load_mean: f64, load_std: f64, points: usize) -> String {
    serde_json::to_string(&headroom_curve(capacity, load_mean, load_std, points)).expect("plain numbers")
}

#[wasm_bindgen(js_name = costVsV)]
pub fn cost_vs_v_json(horizon: usize, seed: u64, points: usize) -> Result<String, JsValue> {
    to_js(cost_vs_v(horizon, seed, points))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_json(overrides: &str, horizon: usize, seed: u64) -> Result<String, JsValue> {
    to_js(simulate(overrides, horizon, seed))
}
