//! Online charging control for a network of EV stations with local storage
//! and renewables, under probabilistic feeder limits.
//!
//! The proposed controller minimizes a drift-plus-penalty bound each slot:
//! arrivals are directed greedily ([`directing`]), outlets and storage follow
//! bang-bang rules ([`station`]) and grid draws come from a projected
//! subgradient loop on the node multipliers ([`dual`]). [`scheduler`] ties
//! these together; [`baselines`] holds the greedy comparison policy.

pub mod baselines;
pub mod bounds;
pub mod config;
pub mod directing;
pub mod dual;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod scheduler;
pub mod station;

pub use bounds::{compute_constants, headrooms, node_headroom, EnvBounds, LyapunovConstants};
pub use config::{Config, ConfigError, PolicyKind, Scenario};
pub use dual::{solve_grid_draws, DualConfig, DualOutcome, GridProblem};
pub use metrics::{aggregate, RunReport, SlotRecord};
pub use model::{
    FeederNode, FeederTopology, OutletId, SlotDecision, SlotInputs, StationConfig, StationFleet, SystemState,
};
pub use scheduler::{run_horizon, step, ChargingNetwork, Controller, SchedulerError};
