//! Constants of the drift-plus-penalty bound and the deterministic node
//! headroom that replaces the overload chance constraint.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FeederTopology, StationFleet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error(
        "V_max = {v_max} is not positive: the smallest battery is too small for U_max, \
         the station rates and lambda_max"
    )]
    NonpositiveVMax { v_max: f64 },
    #[error("V = {v} must satisfy 0 < V <= V_max = {v_max}")]
    VOutOfRange { v: f64, v_max: f64 },
    #[error("invalid bound: {0}")]
    Invalid(String),
}

/// Bounds on the exogenous processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvBounds {
    /// Largest single demand `E_max` in kWh.
    pub e_max: f64,
    /// Largest renewable rate `U_max` in kW.
    pub u_max: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl EnvBounds {
    pub fn validate(&self) -> Result<(), BoundsError> {
        if !(self.e_max > 0.0 && self.u_max > 0.0 && self.c_max > 0.0) {
            return Err(BoundsError::Invalid(
                "E_max, U_max and C_max must be positive".into(),
            ));
        }
        if !(self.c_min >= 0.0 && self.c_min <= self.c_max) {
            return Err(BoundsError::Invalid(format!(
                "price bounds [{}, {}] are not an interval of nonnegative prices",
                self.c_min, self.c_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConstants {
    pub alpha_max: f64,
    pub beta_max: f64,
    pub delta_max: f64,
    /// `V * C_max + L * lambda_max`
    pub t_max: f64,
    pub v_max: f64,
    /// The tradeoff parameter in use.
    pub v: f64,
    pub lambda_max: f64,
}

impl LyapunovConstants {
    /// Cost gap `delta_max / V` between the online policy and
    /// the optimal time-average cost.
    pub fn cost_gap(&self) -> f64 {
        self.delta_max / self.v
    }
}

/// Computes every constant for the given fleet and network. `v = None` picks
/// `V = V_max`.
pub fn compute_constants(
    fleet: &StationFleet,
    topo: &FeederTopology,
    env: &EnvBounds,
    lambda_max: f64,
    v: Option<f64>,
) -> Result<LyapunovConstants, BoundsError> {
    env.validate()?;
    if fleet.is_empty() {
        return Err(BoundsError::Invalid("empty fleet".into()));
    }
    if !(lambda_max >= 0.0) || !lambda_max.is_finite() {
        return Err(BoundsError::Invalid(format!(
            "lambda_max must be finite and nonnegative, got {lambda_max}"
        )));
    }
    let r_max = fleet.max_rate();
    let alpha_max = 0.5 * r_max * r_max + 0.5 * env.e_max * env.e_max;

    let renewable_in = fleet.max_eta_charge() * env.u_max;
    let station_out = fleet
        .iter()
        .map(|s| s.station_rate_max())
        .fold(0.0, f64::max);
    let beta_max = 0.5 * (renewable_in * renewable_in).max(station_out * station_out);

    let outlets = fleet.total_outlets() as f64;
    let delta_max = outlets * alpha_max + fleet.len() as f64 * beta_max;

    let nodes = topo.node_count() as f64;
    // J is read as J_max and paired with the largest rate and loss factor.
    let discharge_reserve = fleet.max_eta_discharge() * fleet.max_outlets() as f64 * r_max;
    let v_max = (fleet.min_capacity() - renewable_in - discharge_reserve - nodes * lambda_max)
        / env.c_max;
    if !(v_max > 0.0) {
        return Err(BoundsError::NonpositiveVMax { v_max });
    }

    let v = v.unwrap_or(v_max);
    // V_max itself must be admissible even after rounding in a caller.
    if !(v > 0.0) || v > v_max * (1.0 + 1e-12) {
        return Err(BoundsError::VOutOfRange { v, v_max });
    }
    Ok(LyapunovConstants {
        alpha_max,
        beta_max,
        delta_max,
        t_max: v * env.c_max + nodes * lambda_max,
        v_max,
        v,
        lambda_max,
    })
}

/// Deterministic cap on the grid draw under node `l`:
/// `P_l - E{N_l} - sigma_l / sqrt(2 epsilon)`. May be negative.
pub fn node_headroom(topo: &FeederTopology, epsilon: f64, l: usize) -> f64 {
    debug_assert!(epsilon > 0.0 && epsilon < 1.0);
    let node = topo.node(l);
    node.capacity - node.load_mean - node.load_std / (2.0 * epsilon).sqrt()
}

/// [`node_headroom`] for every node.
pub fn headrooms(topo: &FeederTopology, epsilon: f64) -> Vec<f64> {
    (0..topo.node_count())
        .map(|l| node_headroom(topo, epsilon, l))
        .collect()
}
