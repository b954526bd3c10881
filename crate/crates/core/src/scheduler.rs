//! Slot orchestration of the online policy and state advancement.
//!
//! Within a slot the steps run in a fixed order: directing, outlet rates,
//! renewable storage input, grid draws, then the queue and battery updates.
//! Rates come before `R_i` and `D_i^d` because both are bounded by the
//! renewable surplus or deficit the rates create.

use thiserror::Error;

use crate::baselines;
use crate::bounds::{headrooms, EnvBounds, LyapunovConstants};
use crate::directing::{direct, MatchInput};
use crate::dual::{solve_grid_draws, DualConfig, GridProblem};
use crate::metrics::{aggregate, DualDiagnostics, RunReport, SlotRecord};
use crate::model::{
    pos, step_battery, step_queue, FeederTopology, ModelError, OutletId, Session, SlotDecision,
    SlotInputs, StationConfig, StationFleet, SystemState, ENERGY_TOL,
};
use crate::station::{outlet_rate, renewable_input};

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("slot {slot}: {source}")]
    Model {
        slot: u64,
        #[source]
        source: ModelError,
    },
    #[error("slot {slot}: decision violates a constraint: {reason}")]
    Decision { slot: u64, reason: String },
    #[error("slot {slot}: queue {queue} kWh exceeds E_max {e_max} kWh")]
    QueueBound { slot: u64, queue: f64, e_max: f64 },
    #[error("slot {slot}: bad inputs: {reason}")]
    Inputs { slot: u64, reason: String },
}

/// The physical system a policy runs on.
#[derive(Debug, Clone)]
pub struct ChargingNetwork {
    pub topo: FeederTopology,
    pub fleet: StationFleet,
    pub env: EnvBounds,
    /// Tolerated overload probability per node.
    pub epsilon: f64,
}

impl ChargingNetwork {
    pub fn new(
        topo: FeederTopology,
        fleet: StationFleet,
        env: EnvBounds,
        epsilon: f64,
    ) -> Result<Self, ModelError> {
        if topo.station_count() != fleet.len() {
            return Err(ModelError::Shape(format!(
                "topology feeds {} stations, fleet has {}",
                topo.station_count(),
                fleet.len()
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(ModelError::InvalidTopology(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        Ok(Self {
            topo,
            fleet,
            env,
            epsilon,
        })
    }

    pub fn headrooms(&self) -> Vec<f64> {
        headrooms(&self.topo, self.epsilon)
    }

    fn check_inputs(&self, slot: u64, inputs: &SlotInputs) -> Result<(), SchedulerError> {
        let bad = |reason: String| Err(SchedulerError::Inputs { slot, reason });
        if inputs.renewable.len() != self.fleet.len() {
            return bad(format!("{} renewable values", inputs.renewable.len()));
        }
        if inputs.loads.len() != self.topo.node_count() {
            return bad(format!("{} load values", inputs.loads.len()));
        }
        let tol = ENERGY_TOL;
        if let Some(e) = inputs
            .arrivals
            .iter()
            .find(|&&e| !(e >= 0.0 && e <= self.env.e_max + tol))
        {
            return bad(format!("arrival {e} outside [0, E_max]"));
        }
        if let Some(u) = inputs
            .renewable
            .iter()
            .find(|&&u| !(u >= 0.0 && u <= self.env.u_max + tol))
        {
            return bad(format!("renewable {u} outside [0, U_max]"));
        }
        if !(inputs.price >= self.env.c_min - tol && inputs.price <= self.env.c_max + tol) {
            return bad(format!("price {} outside [C_min, C_max]", inputs.price));
        }
        if inputs.loads.iter().any(|&n| !(n >= 0.0)) {
            return bad("negative uncontrollable load".into());
        }
        Ok(())
    }
}

/// Which policy drives the stations.
#[derive(Debug, Clone)]
pub enum Controller {
    /// Drift-plus-penalty with the dual grid-draw loop.
    Proposed {
        consts: LyapunovConstants,
        dual: DualConfig,
    },
    /// Most-charged station first, full rate, battery before grid.
    Greedy,
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Proposed { .. } => "proposed",
            Controller::Greedy => "greedy",
        }
    }
}

/// What a station did with its supply after the grid draw was fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Settlement {
    /// Energy removed from the battery, losses included.
    pub battery_draw: f64,
    /// Energy the outlets could not get and gave back.
    pub curtailed: f64,
}

/// Covers the outlet deficit left after renewable and `grid_draw` from the
/// battery. When the battery cannot cover it, delivered rates are cut,
/// starting at the outlets with the smallest remaining demand.
pub(crate) fn settle_station(
    cfg: &StationConfig,
    battery: f64,
    renewable: f64,
    grid_draw: f64,
    remaining: &[f64],
    rates: &mut [f64],
) -> Settlement {
    let gap = pos(rates.iter().sum::<f64>() - renewable);
    let need = pos(gap - grid_draw);
    let available = battery / cfg.eta_discharge;
    let mut curtailed = 0.0;
    if need > available {
        let mut shortfall = need - available;
        let mut order: Vec<usize> = (0..rates.len()).collect();
        order.sort_by(|&a, &b| remaining[a].total_cmp(&remaining[b]).then(a.cmp(&b)));
        for j in order {
            if shortfall <= 0.0 {
                break;
            }
            let cut = rates[j].min(shortfall);
            rates[j] -= cut;
            shortfall -= cut;
            curtailed += cut;
        }
    }
    let gap = pos(rates.iter().sum::<f64>() - renewable);
    let battery_draw = (cfg.eta_discharge * pos(gap - grid_draw)).min(battery);
    Settlement {
        battery_draw,
        curtailed,
    }
}

/// Result of one slot.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    pub next: SystemState,
    pub decision: SlotDecision,
    pub record: SlotRecord,
}

/// Runs the proposed policy for one slot.
pub fn run_slot(
    net: &ChargingNetwork,
    state: &SystemState,
    inputs: &SlotInputs,
    consts: &LyapunovConstants,
    dual_cfg: &DualConfig,
) -> Result<SlotOutcome, SchedulerError> {
    net.check_inputs(state.slot, inputs)?;
    let fleet = &net.fleet;
    let shifted = state.shifted_levels(fleet, consts.t_max);

    // (1) directing
    let assignment = direct(&MatchInput::from_state(state, inputs, fleet, &shifted));
    let incoming = incoming_by_outlet(fleet, inputs, &assignment);

    // (2) outlet rates
    let mut rate_decisions = Vec::with_capacity(fleet.len());
    let mut rates = Vec::with_capacity(fleet.len());
    for (i, cfg) in fleet.iter().enumerate() {
        let (dec, del): (Vec<f64>, Vec<f64>) = (0..cfg.outlets)
            .map(|j| {
                let r = outlet_rate(state.queues[i][j], incoming[i][j], shifted[i], cfg);
                (r.decision, r.delivered)
            })
            .unzip();
        rate_decisions.push(dec);
        rates.push(del);
    }

    // (3) renewable into storage
    let battery_charge: Vec<f64> = fleet
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            renewable_input(shifted[i], inputs.renewable[i], rates[i].iter().sum(), cfg)
        })
        .collect();

    // (4) grid draws
    let demand_gaps: Vec<f64> = rates
        .iter()
        .zip(&inputs.renewable)
        .map(|(r, &u)| pos(r.iter().sum::<f64>() - u))
        .collect();
    let problem = GridProblem {
        topo: &net.topo,
        fleet,
        shifted,
        demand_gaps,
        price: inputs.price,
        v: consts.v,
        headrooms: net.headrooms(),
    };
    let dual = solve_grid_draws(&problem, consts.lambda_max, dual_cfg);
    let diagnostics = DualDiagnostics {
        iterations: dual.iterations,
        converged: dual.converged,
        gap_estimate: dual.gap_estimate(),
        max_multiplier: dual.max_multiplier(),
    };

    let decision = SlotDecision {
        assignment,
        rate_decisions,
        rates,
        battery_charge,
        grid_draw: dual.draws,
        battery_draw: Vec::new(),
        multipliers: dual.multipliers,
    };
    advance(net, state, inputs, decision, &incoming, Some(diagnostics))
}

pub(crate) fn incoming_by_outlet(
    fleet: &StationFleet,
    inputs: &SlotInputs,
    assignment: &[(usize, OutletId)],
) -> Vec<Vec<f64>> {
    let mut incoming: Vec<Vec<f64>> = fleet.iter().map(|s| vec![0.0; s.outlets]).collect();
    for &(k, o) in assignment {
        incoming[o.station][o.outlet] = inputs.arrivals[k];
    }
    incoming
}

/// Settles supply, checks the decision, and advances queues and batteries.
pub(crate) fn advance(
    net: &ChargingNetwork,
    state: &SystemState,
    inputs: &SlotInputs,
    mut decision: SlotDecision,
    incoming: &[Vec<f64>],
    dual: Option<DualDiagnostics>,
) -> Result<SlotOutcome, SchedulerError> {
    let slot = state.slot;
    let fleet = &net.fleet;
    let model_err = |source| SchedulerError::Model { slot, source };

    decision.battery_draw = vec![0.0; fleet.len()];
    let mut curtailed = 0.0;
    for (i, cfg) in fleet.iter().enumerate() {
        let remaining: Vec<f64> = (0..cfg.outlets)
            .map(|j| state.queues[i][j] + incoming[i][j])
            .collect();
        let s = settle_station(
            cfg,
            state.batteries[i],
            inputs.renewable[i],
            decision.grid_draw[i],
            &remaining,
            &mut decision.rates[i],
        );
        decision.battery_draw[i] = s.battery_draw;
        curtailed += s.curtailed;
    }
    decision
        .check(state, inputs, fleet)
        .map_err(|reason| SchedulerError::Decision { slot, reason })?;

    let mut next = state.clone();
    next.slot = slot + 1;
    let mut waits = Vec::new();
    let mut renewable_direct = 0.0;
    for (i, cfg) in fleet.iter().enumerate() {
        for j in 0..cfg.outlets {
            let q = state.queues[i][j];
            let q_next = step_queue(q, decision.rates[i][j], incoming[i][j]).map_err(model_err)?;
            if q_next > net.env.e_max + ENERGY_TOL {
                return Err(SchedulerError::QueueBound {
                    slot,
                    queue: q_next,
                    e_max: net.env.e_max,
                });
            }
            if q == 0.0 && incoming[i][j] > 0.0 {
                next.sessions[i][j] = Some(Session {
                    accepted_slot: slot,
                    requested: incoming[i][j],
                });
            }
            if q_next == 0.0 {
                if let Some(s) = next.sessions[i][j].take() {
                    waits.push((slot + 1 - s.accepted_slot) as f64 / s.requested);
                }
            }
            next.queues[i][j] = q_next;
        }
        let sum = decision.outlet_sum(i);
        renewable_direct += sum.min(inputs.renewable[i]);
        next.batteries[i] = step_battery(
            state.batteries[i],
            sum,
            inputs.renewable[i],
            decision.grid_draw[i],
            decision.battery_charge[i],
            cfg,
        )
        .map_err(model_err)?;
    }

    let topo = &net.topo;
    let node_grid_load: Vec<f64> = (0..topo.node_count())
        .map(|l| topo.downstream(l).iter().map(|&i| decision.grid_draw[i]).sum())
        .collect();
    let overload = node_grid_load
        .iter()
        .zip(&inputs.loads)
        .zip(topo.nodes())
        .map(|((d, n), node)| d + n > node.capacity)
        .collect();
    let grid_total: f64 = decision.grid_draw.iter().sum();
    let arrivals = inputs.arrivals.iter().filter(|&&e| e > 0.0).count();
    let record = SlotRecord {
        slot,
        price: inputs.price,
        cost: inputs.price * grid_total,
        grid_draw: decision.grid_draw.clone(),
        node_grid_load,
        node_load: inputs.loads.clone(),
        overload,
        batteries: next.batteries.clone(),
        queue_total: next.total_queue(),
        queue_max: next.max_queue(),
        delivered: decision.rates.iter().flatten().sum(),
        renewable_direct,
        renewable_stored: decision.battery_charge.iter().sum(),
        battery_discharge: decision.battery_draw.iter().sum(),
        curtailed,
        arrivals,
        admitted: decision.assignment.len(),
        blocked: arrivals - decision.assignment.len(),
        waits,
        dual,
    };
    Ok(SlotOutcome {
        next,
        decision,
        record,
    })
}

/// Runs one slot under any controller.
pub fn step(
    net: &ChargingNetwork,
    state: &SystemState,
    inputs: &SlotInputs,
    controller: &Controller,
) -> Result<SlotOutcome, SchedulerError> {
    match controller {
        Controller::Proposed { consts, dual } => run_slot(net, state, inputs, consts, dual),
        Controller::Greedy => baselines::run_greedy_slot(net, state, inputs),
    }
}

/// Folds [`step`] over a trace. Returns the report and the final state.
pub fn run_horizon(
    net: &ChargingNetwork,
    init: &SystemState,
    trace: &[SlotInputs],
    controller: &Controller,
    tail_fraction: f64,
) -> Result<(RunReport, SystemState), SchedulerError> {
    let mut state = init.clone();
    let mut records = Vec::with_capacity(trace.len());
    for inputs in trace {
        let out = step(net, &state, inputs, controller)?;
        records.push(out.record);
        state = out.next;
    }
    Ok((aggregate(&net.topo, records, tail_fraction), state))
}
