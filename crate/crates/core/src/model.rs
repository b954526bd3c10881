//! Domain types and the per-slot dynamics of demand queues and batteries.
//!
//! Time is slotted and the slot length is normalized to one, so a rate in kW
//! and an energy in kWh are numerically interchangeable within a slot.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute slack used when checking feasibility of floating point energy
/// balances. Anything beyond this is treated as a policy bug.
pub const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("arrival of {arrival} kWh admitted to a busy outlet (queue {queue} kWh)")]
    AdmissionToBusyOutlet { queue: f64, arrival: f64 },
    #[error("battery discharge of {drawn} kWh exceeds stored energy {available} kWh")]
    InfeasibleDischarge { drawn: f64, available: f64 },
    #[error("battery level {level} kWh would exceed capacity {capacity} kWh")]
    Overcap { level: f64, capacity: f64 },
    #[error("grid draw {draw} kW exceeds the unserved outlet load {gap} kW")]
    GridDrawExceedsGap { draw: f64, gap: f64 },
    #[error("battery charge {charge} kW exceeds the admissible renewable surplus {limit} kW")]
    ChargeExceedsSurplus { charge: f64, limit: f64 },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid station {index}: {reason}")]
    InvalidStation { index: usize, reason: String },
    #[error("state shape mismatch: {0}")]
    Shape(String),
}

/// `(x)^+`
#[inline]
pub fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// One row of the incidence matrix together with the node's ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederNode {
    /// Capacity `P_l` in kW.
    pub capacity: f64,
    /// Mean of the uncontrollable load in kW.
    pub load_mean: f64,
    /// Standard deviation of the uncontrollable load in kW.
    pub load_std: f64,
    /// Stations downstream of this node.
    pub stations: Vec<usize>,
}

/// The distribution network: node ratings plus the station incidence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederTopology {
    nodes: Vec<FeederNode>,
    station_count: usize,
    upstream: Vec<Vec<usize>>,
}

impl FeederTopology {
    pub fn new(nodes: Vec<FeederNode>, station_count: usize) -> Result<Self, ModelError> {
        if nodes.is_empty() {
            return Err(ModelError::InvalidTopology("no nodes".into()));
        }
        let mut upstream = vec![Vec::new(); station_count];
        for (l, node) in nodes.iter().enumerate() {
            if !(node.capacity > 0.0) || !node.capacity.is_finite() {
                return Err(ModelError::InvalidTopology(format!(
                    "node {l}: capacity must be positive, got {}",
                    node.capacity
                )));
            }
            if !(node.load_std >= 0.0) || !node.load_mean.is_finite() {
                return Err(ModelError::InvalidTopology(format!(
                    "node {l}: load statistics must be finite with nonnegative deviation"
                )));
            }
            for &i in &node.stations {
                let Some(up) = upstream.get_mut(i) else {
                    return Err(ModelError::InvalidTopology(format!(
                        "node {l} references station {i}, but there are only {station_count}"
                    )));
                };
                if up.contains(&l) {
                    return Err(ModelError::InvalidTopology(format!(
                        "node {l} lists station {i} twice"
                    )));
                }
                up.push(l);
            }
        }
        if let Some(i) = upstream.iter().position(Vec::is_empty) {
            return Err(ModelError::InvalidTopology(format!(
                "station {i} is not fed by any node"
            )));
        }
        Ok(Self {
            nodes,
            station_count,
            upstream,
        })
    }

    /// Builds the incidence matrix of a radial feeder. `parents[l]` is the
    /// upstream bus of bus `l` (`None` for the substation) and `station_bus[i]`
    /// is the bus station `i` hangs off. A station is downstream of its own bus
    /// and of every bus on the path to the root.
    pub fn radial(
        parents: &[Option<usize>],
        station_bus: &[usize],
        capacity: &[f64],
        load_mean: &[f64],
        load_std: &[f64],
    ) -> Result<Self, ModelError> {
        let n = parents.len();
        if capacity.len() != n || load_mean.len() != n || load_std.len() != n {
            return Err(ModelError::InvalidTopology(
                "per-node rating vectors must match the bus count".into(),
            ));
        }
        let mut rows = vec![Vec::new(); n];
        for (i, &bus) in station_bus.iter().enumerate() {
            let mut cur = Some(bus);
            let mut hops = 0;
            while let Some(l) = cur {
                if l >= n || hops > n {
                    return Err(ModelError::InvalidTopology(format!(
                        "bus path from station {i} leaves the feeder or loops"
                    )));
                }
                rows[l].push(i);
                cur = parents[l];
                hops += 1;
            }
        }
        let nodes = rows
            .into_iter()
            .enumerate()
            .map(|(l, stations)| FeederNode {
                capacity: capacity[l],
                load_mean: load_mean[l],
                load_std: load_std[l],
                stations,
            })
            .collect();
        Self::new(nodes, station_bus.len())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn station_count(&self) -> usize {
        self.station_count
    }

    pub fn nodes(&self) -> &[FeederNode] {
        &self.nodes
    }

    pub fn node(&self, l: usize) -> &FeederNode {
        &self.nodes[l]
    }

    /// Stations `i` with `X_li = 1`.
    pub fn downstream(&self, l: usize) -> &[usize] {
        &self.nodes[l].stations
    }

    /// Nodes `l` with `X_li = 1`.
    pub fn upstream(&self, i: usize) -> &[usize] {
        &self.upstream[i]
    }

    pub fn incidence(&self, l: usize, i: usize) -> bool {
        self.nodes[l].stations.contains(&i)
    }
}

/// Ratings of one charging station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    /// Number of outlets `J_i`.
    pub outlets: usize,
    /// Per-outlet rate limit in kW.
    pub rate_max: f64,
    /// Battery capacity in kWh.
    pub battery_capacity: f64,
    /// Renewable-to-battery charging limit in kW.
    pub battery_charge_max: f64,
    /// Grid draw limit in kW.
    pub grid_draw_max: f64,
    /// Charging efficiency, `0 < eta_charge <= 1`.
    pub eta_charge: f64,
    /// Discharging loss factor, `eta_discharge >= 1`.
    pub eta_discharge: f64,
}

impl StationConfig {
    pub fn validate(&self, index: usize) -> Result<(), ModelError> {
        let fail = |reason: String| Err(ModelError::InvalidStation { index, reason });
        if self.outlets == 0 {
            return fail("a station needs at least one outlet".into());
        }
        if !(self.rate_max > 0.0) {
            return fail(format!("rate_max must be positive, got {}", self.rate_max));
        }
        if !(self.battery_capacity > 0.0) {
            return fail(format!(
                "battery_capacity must be positive, got {}",
                self.battery_capacity
            ));
        }
        if !(self.battery_charge_max >= 0.0) {
            return fail("battery_charge_max must be nonnegative".into());
        }
        // Each outlet must be able to fall back on the grid alone.
        if !(self.grid_draw_max >= self.rate_max) {
            return fail(format!(
                "grid_draw_max ({}) must be at least rate_max ({})",
                self.grid_draw_max, self.rate_max
            ));
        }
        if !(self.eta_charge > 0.0 && self.eta_charge <= 1.0) {
            return fail(format!("eta_charge must lie in (0, 1], got {}", self.eta_charge));
        }
        if !(self.eta_discharge >= 1.0) {
            return fail(format!("eta_discharge must be >= 1, got {}", self.eta_discharge));
        }
        Ok(())
    }

    /// `J_i * r_{i,max}`: the most a station can deliver in one slot.
    pub fn station_rate_max(&self) -> f64 {
        self.outlets as f64 * self.rate_max
    }
}

/// All stations in the network, indexed by station id.
#[derive(Debug, Clone, PartialEq)]
pub struct StationFleet {
    stations: Vec<StationConfig>,
}

impl StationFleet {
    pub fn new(stations: Vec<StationConfig>) -> Result<Self, ModelError> {
        if stations.is_empty() {
            return Err(ModelError::InvalidTopology("fleet has no stations".into()));
        }
        for (i, s) in stations.iter().enumerate() {
            s.validate(i)?;
        }
        Ok(Self { stations })
    }

    pub fn uniform(count: usize, cfg: StationConfig) -> Result<Self, ModelError> {
        Self::new(vec![cfg; count])
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn get(&self, i: usize) -> &StationConfig {
        &self.stations[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, StationConfig> {
        self.stations.iter()
    }

    pub fn total_outlets(&self) -> usize {
        self.stations.iter().map(|s| s.outlets).sum()
    }

    pub fn outlet_ids(&self) -> impl Iterator<Item = OutletId> + '_ {
        self.stations
            .iter()
            .enumerate()
            .flat_map(|(i, s)| (0..s.outlets).map(move |j| OutletId::new(i, j)))
    }

    pub fn max_outlets(&self) -> usize {
        self.stations.iter().map(|s| s.outlets).max().unwrap_or(0)
    }

    pub fn max_rate(&self) -> f64 {
        self.stations.iter().map(|s| s.rate_max).fold(0.0, f64::max)
    }

    pub fn min_capacity(&self) -> f64 {
        self.stations
            .iter()
            .map(|s| s.battery_capacity)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_eta_charge(&self) -> f64 {
        self.stations.iter().map(|s| s.eta_charge).fold(0.0, f64::max)
    }

    pub fn max_eta_discharge(&self) -> f64 {
        self.stations.iter().map(|s| s.eta_discharge).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for StationFleet {
    type Output = StationConfig;

    fn index(&self, i: usize) -> &StationConfig {
        &self.stations[i]
    }
}

/// Outlet `j` of station `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutletId {
    pub station: usize,
    pub outlet: usize,
}

impl OutletId {
    pub fn new(station: usize, outlet: usize) -> Self {
        Self { station, outlet }
    }
}

/// The vehicle currently bound to an outlet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub accepted_slot: u64,
    pub requested: f64,
}

/// Queue and battery state at a slot boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    /// `Q_ij`, residual demand per outlet in kWh.
    pub queues: Vec<Vec<f64>>,
    /// `B_i`, stored energy per station in kWh.
    pub batteries: Vec<f64>,
    /// Vehicle bookkeeping per outlet, used only for waiting-time statistics.
    pub sessions: Vec<Vec<Option<Session>>>,
    /// Index of the next slot to run.
    pub slot: u64,
}

impl SystemState {
    /// Empty queues with the given battery levels.
    pub fn new(fleet: &StationFleet, batteries: Vec<f64>) -> Result<Self, ModelError> {
        if batteries.len() != fleet.len() {
            return Err(ModelError::Shape(format!(
                "{} battery levels for {} stations",
                batteries.len(),
                fleet.len()
            )));
        }
        for (i, (&b, cfg)) in batteries.iter().zip(fleet.iter()).enumerate() {
            if !(0.0..=cfg.battery_capacity).contains(&b) {
                return Err(ModelError::InvalidStation {
                    index: i,
                    reason: format!(
                        "initial level {b} outside [0, {}]",
                        cfg.battery_capacity
                    ),
                });
            }
        }
        Ok(Self {
            queues: fleet.iter().map(|s| vec![0.0; s.outlets]).collect(),
            sessions: fleet.iter().map(|s| vec![None; s.outlets]).collect(),
            batteries,
            slot: 0,
        })
    }

    /// Every battery at `fraction` of its capacity.
    pub fn with_fill(fleet: &StationFleet, fraction: f64) -> Result<Self, ModelError> {
        let levels = fleet
            .iter()
            .map(|s| s.battery_capacity * fraction.clamp(0.0, 1.0))
            .collect();
        Self::new(fleet, levels)
    }

    pub fn queue(&self, id: OutletId) -> f64 {
        self.queues[id.station][id.outlet]
    }

    /// `H_i` for every station.
    pub fn shifted_levels(&self, fleet: &StationFleet, t_max: f64) -> Vec<f64> {
        self.batteries
            .iter()
            .zip(fleet.iter())
            .map(|(&b, cfg)| shifted_level(b, cfg, t_max))
            .collect()
    }

    pub fn total_queue(&self) -> f64 {
        self.queues.iter().flatten().sum()
    }

    pub fn max_queue(&self) -> f64 {
        self.queues.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Exogenous realizations for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotInputs {
    /// `E_k` per entry point in kWh, zero when no vehicle asked.
    pub arrivals: Vec<f64>,
    /// `U_i` per station in kW.
    pub renewable: Vec<f64>,
    /// Grid price per kWh.
    pub price: f64,
    /// Realized uncontrollable load per node in kW.
    pub loads: Vec<f64>,
}

/// Everything decided in a slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotDecision {
    /// Nonzero entries of `W_{k,ij}` as `(entry point, outlet)` pairs.
    pub assignment: Vec<(usize, OutletId)>,
    /// Rate chosen by the control law before delivery clipping.
    pub rate_decisions: Vec<Vec<f64>>,
    /// Rate actually delivered, after clipping to the remaining demand and
    /// after any supply shortfall.
    pub rates: Vec<Vec<f64>>,
    /// `R_i`
    pub battery_charge: Vec<f64>,
    /// `D_i^d`
    pub grid_draw: Vec<f64>,
    /// Energy taken out of each battery, losses included.
    pub battery_draw: Vec<f64>,
    /// Final multipliers `lambda_l` (empty for policies without a dual loop).
    pub multipliers: Vec<f64>,
}

impl SlotDecision {
    /// Does entry point `k` go to outlet `id`?
    pub fn w(&self, k: usize, id: OutletId) -> bool {
        self.assignment.iter().any(|&(kk, o)| kk == k && o == id)
    }

    pub fn outlet_sum(&self, i: usize) -> f64 {
        self.rates[i].iter().sum()
    }

    /// Checks the assignment, box and discharge constraints against the
    /// state the decision was taken in.
    pub fn check(
        &self,
        state: &SystemState,
        inputs: &SlotInputs,
        fleet: &StationFleet,
    ) -> Result<(), String> {
        let mut seen_k = std::collections::BTreeSet::new();
        let mut seen_o = std::collections::BTreeSet::new();
        for &(k, o) in &self.assignment {
            if !seen_k.insert(k) {
                return Err(format!("entry point {k} assigned twice"));
            }
            if !seen_o.insert(o) {
                return Err(format!("outlet {o:?} assigned twice"));
            }
            if state.queue(o) != 0.0 {
                return Err(format!("outlet {o:?} assigned while busy"));
            }
            if !(inputs.arrivals.get(k).copied().unwrap_or(0.0) > 0.0) {
                return Err(format!("entry point {k} assigned without a request"));
            }
        }
        for (i, cfg) in fleet.iter().enumerate() {
            for j in 0..cfg.outlets {
                let r = self.rates[i][j];
                if !(-ENERGY_TOL..=cfg.rate_max + ENERGY_TOL).contains(&r) {
                    return Err(format!("rate {r} at ({i},{j}) outside [0, {}]", cfg.rate_max));
                }
            }
            let sum = self.outlet_sum(i);
            let u = inputs.renewable[i];
            let gap = pos(sum - u);
            let surplus = pos(u - sum);
            let rc = self.battery_charge[i];
            if rc < -ENERGY_TOL || rc > cfg.battery_charge_max.min(surplus) + ENERGY_TOL {
                return Err(format!("battery charge {rc} at station {i} out of range"));
            }
            let d = self.grid_draw[i];
            if d < -ENERGY_TOL || d > cfg.grid_draw_max.min(gap) + ENERGY_TOL {
                return Err(format!("grid draw {d} at station {i} out of range"));
            }
            let drawn = cfg.eta_discharge * (gap - d);
            if drawn < -ENERGY_TOL || drawn > state.batteries[i] + ENERGY_TOL {
                return Err(format!(
                    "battery discharge {drawn} at station {i} outside [0, {}]",
                    state.batteries[i]
                ));
            }
        }
        if self.multipliers.iter().any(|&l| l < 0.0) {
            return Err("negative multiplier".into());
        }
        Ok(())
    }
}

/// One step of the demand queue of an outlet:
/// `[q - rate + arrival * 1{q = 0}]^+`.
pub fn step_queue(q: f64, rate: f64, admitted_arrival: f64) -> Result<f64, ModelError> {
    if admitted_arrival > 0.0 && q != 0.0 {
        return Err(ModelError::AdmissionToBusyOutlet {
            queue: q,
            arrival: admitted_arrival,
        });
    }
    let incoming = if q == 0.0 { admitted_arrival } else { 0.0 };
    Ok(pos(q - rate + incoming))
}

/// One step of a station battery. Errors indicate a policy that violated the
/// supply constraints, not a recoverable condition.
pub fn step_battery(
    b: f64,
    outlet_sum: f64,
    renewable: f64,
    grid_draw: f64,
    battery_charge: f64,
    cfg: &StationConfig,
) -> Result<f64, ModelError> {
    let gap = pos(outlet_sum - renewable);
    if grid_draw > gap + ENERGY_TOL {
        return Err(ModelError::GridDrawExceedsGap {
            draw: grid_draw,
            gap,
        });
    }
    let charge_limit = cfg.battery_charge_max.min(pos(renewable - outlet_sum));
    if battery_charge > charge_limit + ENERGY_TOL {
        return Err(ModelError::ChargeExceedsSurplus {
            charge: battery_charge,
            limit: charge_limit,
        });
    }
    let drawn = cfg.eta_discharge * pos(gap - grid_draw);
    if drawn > b + ENERGY_TOL {
        return Err(ModelError::InfeasibleDischarge {
            drawn,
            available: b,
        });
    }
    let next = b - drawn + cfg.eta_charge * battery_charge;
    if next > cfg.battery_capacity + ENERGY_TOL {
        return Err(ModelError::Overcap {
            level: next,
            capacity: cfg.battery_capacity,
        });
    }
    Ok(next.clamp(0.0, cfg.battery_capacity))
}

/// `H_i = B_i - T_max - eta^- J_i r_{i,max}`.
pub fn shifted_level(b: f64, cfg: &StationConfig, t_max: f64) -> f64 {
    b - t_max - cfg.eta_discharge * cfg.station_rate_max()
}
