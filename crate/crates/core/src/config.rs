//! Scenario files and everything built from them.
//!
//! A scenario is a TOML document. Every section is optional and falls back
//! to the default 19-bus scenario:
//!
//! ```toml
//! [run]
//! policy = "proposed"      # or "greedy"
//! horizon = 360            # slots
//! seed = 1
//! tail_fraction = 0.5      # window of the steady-state battery average
//! initial_fill = 0.5       # battery level at t = 0 as a share of capacity
//!
//! [policy]
//! # v = 500.0              # omitted: V = V_max
//! epsilon = 0.01
//! lambda_max = 1.0
//! kappa = 0.01
//! max_iters = 200
//! xi = 1e-6
//!
//! [environment]
//! e_max = 30.0
//! u_max = 225.0
//! c_min = 0.0
//! c_max = 0.2
//! entry_points = 50
//! arrival_prob = 0.9
//! demand_min = 5.0
//! slot_minutes = 10.0
//! renewable_scale = 1.0
//!
//! [traces]                 # paths are relative to the scenario file
//! # wind = "wind.csv"      # omitted: synthetic AR(1) wind speed
//! wind_kind = "speed"      # or "power" (kW)
//! # price = "price.csv"    # omitted: synthetic daily price cycle
//! station_offset_slots = 7
//!
//! [power_curve]            # optional; default is the V27 table
//! speeds = [3.5, 14.0, 25.0]
//! outputs = [0.0, 225.0, 225.0]
//!
//! [station_defaults]
//! count = 18
//! outlets = 3
//! rate_max = 20.0
//! battery_capacity = 500.0
//! battery_charge_max = 225.0
//! grid_draw_max = 20.0
//! eta_charge = 1.0
//! eta_discharge = 1.0
//!
//! [[station]]              # per-station overrides
//! index = 4
//! battery_capacity = 700.0
//!
//! [feeder]
//! mode = "radial"          # or "explicit"
//!
//! [[node]]
//! parent = 0               # radial mode only; omit for the root
//! capacity = 1000.0
//! load_mean = 200.0
//! load_std = 100.0
//! stations = [0]           # radial: attached here; explicit: the full X row
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{compute_constants, BoundsError, EnvBounds, LyapunovConstants};
use crate::dual::DualConfig;
use crate::ingest::{
    resample, synth_arrivals, synth_loads, synth_price, synth_wind_speed, wind_to_power, CurveError,
    DemandDist, Method, PowerCurve, ResampleError, Trace, TraceError,
};
use crate::model::{FeederNode, FeederTopology, ModelError, SlotInputs, StationConfig, StationFleet, SystemState};
use crate::scheduler::{ChargingNetwork, Controller};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("bad override {0:?}: {1}")]
    Override(String, String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("trace {path}: {source}")]
    Trace {
        path: PathBuf,
        #[source]
        source: TraceError,
    },
    #[error(transparent)]
    Resample(#[from] ResampleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Proposed,
    Greedy,
}

impl std::str::FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "greedy" => Ok(Self::Greedy),
            other => Err(format!("unknown policy {other:?}, expected proposed or greedy")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub policy: PolicyKind,
    pub horizon: usize,
    pub seed: u64,
    pub tail_fraction: f64,
    pub initial_fill: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            policy: PolicyKind::Proposed,
            horizon: 360,
            seed: 1,
            tail_fraction: 0.5,
            initial_fill: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    pub epsilon: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub max_iters: usize,
    pub xi: f64,
}

impl Default for PolicySection {
    fn default() -> Self {
        let d = DualConfig::default();
        Self {
            v: None,
            epsilon: 0.01,
            lambda_max: 1.0,
            kappa: d.step,
            max_iters: d.max_iters,
            xi: d.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub e_max: f64,
    pub u_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub entry_points: usize,
    pub arrival_prob: f64,
    pub demand_min: f64,
    pub slot_minutes: f64,
    pub renewable_scale: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            e_max: 30.0,
            u_max: 225.0,
            c_min: 0.0,
            c_max: 0.2,
            entry_points: 50,
            arrival_prob: 0.9,
            demand_min: 5.0,
            slot_minutes: 10.0,
            renewable_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindKind {
    Speed,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wind: Option<PathBuf>,
    pub wind_kind: WindKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price: Option<PathBuf>,
    /// Station `i` sees the shared wind series shifted by `i` times this.
    pub station_offset_slots: usize,
    pub wind_mean: f64,
    pub wind_persistence: f64,
    pub wind_noise: f64,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self {
            wind: None,
            wind_kind: WindKind::Speed,
            price: None,
            station_offset_slots: 7,
            wind_mean: 8.0,
            wind_persistence: 0.85,
            wind_noise: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub speeds: Vec<f64>,
    pub outputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationDefaults {
    pub count: usize,
    pub outlets: usize,
    pub rate_max: f64,
    pub battery_capacity: f64,
    pub battery_charge_max: f64,
    pub grid_draw_max: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
}

impl Default for StationDefaults {
    fn default() -> Self {
        Self {
            count: 18,
            outlets: 3,
            rate_max: 20.0,
            battery_capacity: 500.0,
            battery_charge_max: 225.0,
            grid_draw_max: 20.0,
            eta_charge: 1.0,
            eta_discharge: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationOverride {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outlets: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub battery_capacity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub battery_charge_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_draw_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_charge: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_discharge: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeederMode {
    Radial,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeederSection {
    pub mode: FeederMode,
}

impl Default for FeederSection {
    fn default() -> Self {
        Self {
            mode: FeederMode::Radial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    pub capacity: f64,
    pub load_mean: f64,
    pub load_std: f64,
    #[serde(default)]
    pub stations: Vec<usize>,
}

/// Parent bus of each of the 19 buses of the default feeder: a 10-bus trunk
/// with three 3-bus laterals.
pub const DEFAULT_FEEDER_PARENTS: [Option<usize>; 19] = [
    None,
    Some(0),
    Some(1),
    Some(2),
    Some(3),
    Some(4),
    Some(5),
    Some(6),
    Some(7),
    Some(8),
    Some(2),
    Some(10),
    Some(11),
    Some(5),
    Some(13),
    Some(14),
    Some(7),
    Some(16),
    Some(17),
];

fn default_nodes() -> Vec<NodeSection> {
    DEFAULT_FEEDER_PARENTS
        .iter()
        .enumerate()
        .map(|(bus, &parent)| NodeSection {
            parent,
            capacity: 1000.0,
            load_mean: 200.0,
            load_std: 100.0,
            // station i hangs off bus i + 1
            stations: if bus == 0 { vec![] } else { vec![bus - 1] },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunSection,
    pub policy: PolicySection,
    pub environment: EnvSection,
    pub traces: TraceSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_curve: Option<CurveSection>,
    pub station_defaults: StationDefaults,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub station: Vec<StationOverride>,
    pub feeder: FeederSection,
    pub node: Vec<NodeSection>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            run: RunSection::default(),
            policy: PolicySection::default(),
            environment: EnvSection::default(),
            traces: TraceSection::default(),
            power_curve: None,
            station_defaults: StationDefaults::default(),
            station: Vec::new(),
            feeder: FeederSection::default(),
            node: default_nodes(),
        }
    }
}

/// Short names accepted by [`Config::apply_override`] next to dotted paths.
pub const ALIASES: &[(&str, &str)] = &[
    ("V", "policy.v"),
    ("v", "policy.v"),
    ("epsilon", "policy.epsilon"),
    ("lambda_max", "policy.lambda_max"),
    ("kappa", "policy.kappa"),
    ("M", "policy.max_iters"),
    ("xi", "policy.xi"),
    ("B_max", "station_defaults.battery_capacity"),
    ("renewable_scale", "environment.renewable_scale"),
    ("seed", "run.seed"),
    ("horizon", "run.horizon"),
    ("policy", "run.policy"),
];

fn parse_scalar(raw: &str) -> toml::Value {
    let raw = raw.trim();
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    match raw {
        "true" => toml::Value::Boolean(true),
        "false" => toml::Value::Boolean(false),
        _ => toml::Value::String(raw.to_string()),
    }
}

fn int_to_float_where_needed(value: toml::Value, existing: Option<&toml::Value>) -> toml::Value {
    match (value, existing) {
        (toml::Value::Integer(i), Some(toml::Value::Float(_))) => toml::Value::Float(i as f64),
        (v, _) => v,
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `key=value`. Keys are dotted paths such as `policy.epsilon` or
    /// one of [`ALIASES`]. Floats fields accept integer literals.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let bad = |why: String| ConfigError::Override(spec.to_string(), why);
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| bad("expected key=value".into()))?;
        let key = key.trim();
        let path = ALIASES
            .iter()
            .find(|(a, _)| *a == key)
            .map_or(key, |(_, p)| *p);
        let mut root = toml::Value::try_from(&*self).map_err(|e| bad(e.to_string()))?;
        let parts: Vec<&str> = path.split('.').collect();
        let (last, head) = parts.split_last().expect("split yields one part");
        let mut table = &mut root;
        for part in head {
            table = table
                .as_table_mut()
                .and_then(|t| t.get_mut(*part))
                .ok_or_else(|| bad(format!("no section {part:?}")))?;
        }
        let table = table
            .as_table_mut()
            .ok_or_else(|| bad(format!("{path:?} is not inside a table")))?;
        let mut value = parse_scalar(raw);
        // An unset optional float (V) has no entry to learn its type from.
        if path == "policy.v" {
            if let toml::Value::Integer(i) = value {
                value = toml::Value::Float(i as f64);
            }
        }
        let value = int_to_float_where_needed(value, table.get(*last));
        table.insert(last.to_string(), value);
        *self = root.try_into().map_err(|e: toml::de::Error| bad(e.to_string()))?;
        if key == "B_max" {
            // a sweep over capacity should move every station
            for s in &mut self.station {
                s.battery_capacity = None;
            }
        }
        Ok(())
    }

    pub fn env_bounds(&self) -> EnvBounds {
        EnvBounds {
            e_max: self.environment.e_max,
            u_max: self.environment.u_max,
            c_min: self.environment.c_min,
            c_max: self.environment.c_max,
        }
    }

    pub fn dual_config(&self) -> DualConfig {
        DualConfig {
            step: self.policy.kappa,
            max_iters: self.policy.max_iters,
            tol: self.policy.xi,
        }
    }

    pub fn fleet(&self) -> Result<StationFleet, ConfigError> {
        let d = &self.station_defaults;
        let base = StationConfig {
            outlets: d.outlets,
            rate_max: d.rate_max,
            battery_capacity: d.battery_capacity,
            battery_charge_max: d.battery_charge_max,
            grid_draw_max: d.grid_draw_max,
            eta_charge: d.eta_charge,
            eta_discharge: d.eta_discharge,
        };
        let mut stations = vec![base; d.count];
        for o in &self.station {
            let s = stations.get_mut(o.index).ok_or_else(|| {
                ConfigError::Schema(format!(
                    "station override index {} but only {} stations",
                    o.index, d.count
                ))
            })?;
            if let Some(v) = o.outlets {
                s.outlets = v;
            }
            if let Some(v) = o.rate_max {
                s.rate_max = v;
            }
            if let Some(v) = o.battery_capacity {
                s.battery_capacity = v;
            }
            if let Some(v) = o.battery_charge_max {
                s.battery_charge_max = v;
            }
            if let Some(v) = o.grid_draw_max {
                s.grid_draw_max = v;
            }
            if let Some(v) = o.eta_charge {
                s.eta_charge = v;
            }
            if let Some(v) = o.eta_discharge {
                s.eta_discharge = v;
            }
        }
        Ok(StationFleet::new(stations)?)
    }

    pub fn topology(&self) -> Result<FeederTopology, ConfigError> {
        let count = self.station_defaults.count;
        match self.feeder.mode {
            FeederMode::Explicit => {
                let nodes = self
                    .node
                    .iter()
                    .map(|n| FeederNode {
                        capacity: n.capacity,
                        load_mean: n.load_mean,
                        load_std: n.load_std,
                        stations: n.stations.clone(),
                    })
                    .collect();
                Ok(FeederTopology::new(nodes, count)?)
            }
            FeederMode::Radial => {
                let mut station_bus = vec![usize::MAX; count];
                for (bus, n) in self.node.iter().enumerate() {
                    for &i in &n.stations {
                        let slot = station_bus.get_mut(i).ok_or_else(|| {
                            ConfigError::Schema(format!("node {bus} attaches unknown station {i}"))
                        })?;
                        if *slot != usize::MAX {
                            return Err(ConfigError::Schema(format!(
                                "station {i} attached to buses {} and {bus}",
                                *slot
                            )));
                        }
                        *slot = bus;
                    }
                }
                if let Some(i) = station_bus.iter().position(|&b| b == usize::MAX) {
                    return Err(ConfigError::Schema(format!("station {i} is not attached to any bus")));
                }
                let parents: Vec<Option<usize>> = self.node.iter().map(|n| n.parent).collect();
                let col = |f: fn(&NodeSection) -> f64| self.node.iter().map(f).collect::<Vec<_>>();
                Ok(FeederTopology::radial(
                    &parents,
                    &station_bus,
                    &col(|n| n.capacity),
                    &col(|n| n.load_mean),
                    &col(|n| n.load_std),
                )?)
            }
        }
    }

    pub fn power_curve(&self) -> Result<PowerCurve, ConfigError> {
        Ok(match &self.power_curve {
            Some(c) => PowerCurve::new(c.speeds.clone(), c.outputs.clone())?,
            None => PowerCurve::vestas_v27(),
        })
    }

    pub fn network(&self) -> Result<ChargingNetwork, ConfigError> {
        let env = self.env_bounds();
        env.validate()?;
        Ok(ChargingNetwork::new(
            self.topology()?,
            self.fleet()?,
            env,
            self.policy.epsilon,
        )?)
    }

    fn check_run(&self) -> Result<(), ConfigError> {
        let r = &self.run;
        if r.horizon == 0 {
            return Err(ConfigError::Schema("run.horizon must be positive".into()));
        }
        if !(0.0..=1.0).contains(&r.tail_fraction) || !(0.0..=1.0).contains(&r.initial_fill) {
            return Err(ConfigError::Schema(
                "run.tail_fraction and run.initial_fill must lie in [0, 1]".into(),
            ));
        }
        let e = &self.environment;
        if !(0.0..=1.0).contains(&e.arrival_prob) {
            return Err(ConfigError::Schema("environment.arrival_prob must lie in [0, 1]".into()));
        }
        if !(e.demand_min >= 0.0 && e.demand_min < e.e_max) {
            return Err(ConfigError::Schema(
                "environment.demand_min must lie in [0, e_max)".into(),
            ));
        }
        if !(e.slot_minutes > 0.0) || !(e.renewable_scale >= 0.0) {
            return Err(ConfigError::Schema(
                "environment.slot_minutes must be positive and renewable_scale nonnegative".into(),
            ));
        }
        if let Some(v) = self.policy.v {
            if !(v > 0.0) {
                return Err(ConfigError::Schema(format!(
                    "policy.v = {v}: V must satisfy 0 < V <= V_max"
                )));
            }
        }
        self.dual_config().validate().map_err(ConfigError::Schema)
    }
}

/// A fully built, immutable run description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    pub net: ChargingNetwork,
    /// Present for the proposed policy.
    pub consts: Option<LyapunovConstants>,
    pub dual: DualConfig,
    pub trace: Vec<SlotInputs>,
    pub init: SystemState,
}

impl Scenario {
    /// Validates the config and builds the network, constants and trace.
    /// Relative trace paths resolve against `base_dir`.
    pub fn build(config: Config, base_dir: &Path) -> Result<Self, ConfigError> {
        config.check_run()?;
        let net = config.network()?;
        let consts = match config.run.policy {
            PolicyKind::Proposed => Some(compute_constants(
                &net.fleet,
                &net.topo,
                &net.env,
                config.policy.lambda_max,
                config.policy.v,
            )?),
            PolicyKind::Greedy => None,
        };
        let trace = build_trace(&config, &net, base_dir)?;
        let init = SystemState::with_fill(&net.fleet, config.run.initial_fill)?;
        Ok(Self {
            dual: config.dual_config(),
            config,
            net,
            consts,
            trace,
            init,
        })
    }

    pub fn controller(&self) -> Controller {
        match self.consts {
            Some(consts) => Controller::Proposed {
                consts,
                dual: self.dual,
            },
            None => Controller::Greedy,
        }
    }

    /// `key = value` header for the summary file.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let c = &self.config;
        let mut meta = vec![
            ("policy".to_string(), self.controller().name().to_string()),
            ("seed".into(), c.run.seed.to_string()),
            ("rng".into(), "chacha8".into()),
            ("horizon".into(), c.run.horizon.to_string()),
            ("stations".into(), self.net.fleet.len().to_string()),
            ("nodes".into(), self.net.topo.node_count().to_string()),
            ("epsilon".into(), c.policy.epsilon.to_string()),
            ("battery_capacity_min".into(), self.net.fleet.min_capacity().to_string()),
            ("renewable_scale".into(), c.environment.renewable_scale.to_string()),
        ];
        if let Some(k) = &self.consts {
            meta.extend([
                ("v".to_string(), k.v.to_string()),
                ("v_max".into(), k.v_max.to_string()),
                ("t_max".into(), k.t_max.to_string()),
                ("delta_max".into(), k.delta_max.to_string()),
                ("lambda_max".into(), k.lambda_max.to_string()),
                ("kappa".into(), self.dual.step.to_string()),
                ("max_iters".into(), self.dual.max_iters.to_string()),
                ("xi".into(), self.dual.tol.to_string()),
            ]);
        }
        meta
    }
}

fn load_trace(path: &Path, base_dir: &Path) -> Result<Trace, ConfigError> {
    let full = base_dir.join(path);
    Trace::load(&full).map_err(|source| ConfigError::Trace { path: full, source })
}

/// Value of a slot-resolution series at slot `t`, wrapping around its end.
fn cyclic(series: &[f64], t: usize) -> f64 {
    series[t % series.len()]
}

/// Hourly values covering `slots` slots plus one closing knot.
fn hours_needed(slots: usize, slot_minutes: f64) -> usize {
    (slots as f64 * slot_minutes / 60.0).ceil() as usize + 4
}

/// Turbine output at slot resolution, before scaling.
pub fn wind_power_series(config: &Config, slots: usize, base_dir: &Path) -> Result<Vec<f64>, ConfigError> {
    let curve = config.power_curve()?;
    let (minutes, values, kind) = match &config.traces.wind {
        Some(p) => {
            let t = load_trace(p, base_dir)?;
            (t.minutes(), t.values, config.traces.wind_kind)
        }
        None => {
            let tr = &config.traces;
            let speeds = synth_wind_speed(
                hours_needed(slots, config.environment.slot_minutes),
                tr.wind_mean,
                tr.wind_persistence,
                tr.wind_noise,
                config.run.seed,
            );
            let minutes = (0..speeds.len()).map(|h| h as f64 * 60.0).collect();
            (minutes, speeds, WindKind::Speed)
        }
    };
    let power: Vec<f64> = match kind {
        WindKind::Speed => values.iter().map(|&s| wind_to_power(s.max(0.0), &curve)).collect(),
        WindKind::Power => values,
    };
    let out = resample(&minutes, &power, Method::CubicSpline, config.environment.slot_minutes)?;
    // Splines overshoot between knots.
    let cap = curve.rated_power().max(config.environment.u_max);
    Ok(out.into_iter().map(|p| p.clamp(0.0, cap)).collect())
}

/// Price at slot resolution.
pub fn price_series(config: &Config, slots: usize, base_dir: &Path) -> Result<Vec<f64>, ConfigError> {
    let env = &config.environment;
    let (minutes, values) = match &config.traces.price {
        Some(p) => {
            let t = load_trace(p, base_dir)?;
            (t.minutes(), t.values)
        }
        None => {
            let prices = synth_price(
                hours_needed(slots, env.slot_minutes),
                env.c_min,
                env.c_max,
                config.run.seed,
            );
            ((0..prices.len()).map(|h| h as f64 * 60.0).collect(), prices)
        }
    };
    let out = resample(&minutes, &values, Method::Linear, env.slot_minutes)?;
    Ok(out.into_iter().map(|c| c.clamp(env.c_min, env.c_max)).collect())
}

/// Assembles the per-slot inputs. Trace files shorter than the horizon are
/// repeated; renewable output is scaled then capped at `U_max`.
pub fn build_trace(config: &Config, net: &ChargingNetwork, base_dir: &Path) -> Result<Vec<SlotInputs>, ConfigError> {
    let slots = config.run.horizon;
    let env = &config.environment;
    let seed = config.run.seed;
    let wind = wind_power_series(config, slots, base_dir)?;
    let price = price_series(config, slots, base_dir)?;
    let loads = synth_loads(&net.topo, slots, seed);
    let demand = DemandDist {
        min: env.demand_min,
        max: env.e_max,
    };
    let arrivals = synth_arrivals(env.entry_points, env.arrival_prob, demand, slots, seed);
    let offset = config.traces.station_offset_slots;
    Ok(loads
        .into_iter()
        .zip(arrivals)
        .enumerate()
        .map(|(t, (loads, arrivals))| SlotInputs {
            arrivals,
            renewable: (0..net.fleet.len())
                .map(|i| (env.renewable_scale * cyclic(&wind, t + i * offset)).min(env.u_max))
                .collect(),
            price: cyclic(&price, t),
            loads,
        })
        .collect())
}
