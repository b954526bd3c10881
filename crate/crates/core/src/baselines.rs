//! Greedy comparison policy.
//!
//! Each request goes to an idle outlet of the station with the most stored
//! energy, every busy outlet charges at full rate, and the outlet load is
//! covered by renewable, then battery, then grid. Surplus renewable always
//! goes into storage. Grid draws obey the same node headroom as the proposed
//! policy; anything the grid cannot cover is curtailed.

use crate::dual::merit_order_fill;
use crate::model::{pos, OutletId, SlotDecision, SlotInputs, SystemState};
use crate::scheduler::{advance, incoming_by_outlet, ChargingNetwork, SchedulerError, SlotOutcome};

/// Greedy decision for one slot, before supply settlement.
pub fn greedy_slot(net: &ChargingNetwork, state: &SystemState, inputs: &SlotInputs) -> SlotDecision {
    let fleet = &net.fleet;

    let mut stations: Vec<usize> = (0..fleet.len()).collect();
    stations.sort_by(|&a, &b| {
        state.batteries[b]
            .total_cmp(&state.batteries[a])
            .then(a.cmp(&b))
    });
    let mut idle = stations.iter().flat_map(|&i| {
        (0..fleet[i].outlets)
            .filter(move |&j| state.queues[i][j] == 0.0)
            .map(move |j| OutletId::new(i, j))
    });
    let mut assignment = Vec::new();
    for (k, _) in inputs.arrivals.iter().enumerate().filter(|(_, &e)| e > 0.0) {
        match idle.next() {
            Some(o) => assignment.push((k, o)),
            None => break,
        }
    }
    let incoming = incoming_by_outlet(fleet, inputs, &assignment);

    let mut rate_decisions = Vec::with_capacity(fleet.len());
    let mut rates = Vec::with_capacity(fleet.len());
    for (i, cfg) in fleet.iter().enumerate() {
        let (dec, del): (Vec<f64>, Vec<f64>) = (0..cfg.outlets)
            .map(|j| {
                let remaining = state.queues[i][j] + incoming[i][j];
                if remaining > 0.0 {
                    (cfg.rate_max, cfg.rate_max.min(remaining))
                } else {
                    (0.0, 0.0)
                }
            })
            .unzip();
        rate_decisions.push(dec);
        rates.push(del);
    }

    let mut battery_charge = Vec::with_capacity(fleet.len());
    let mut wanted = Vec::with_capacity(fleet.len());
    for (i, cfg) in fleet.iter().enumerate() {
        let sum: f64 = rates[i].iter().sum();
        let u = inputs.renewable[i];
        let b = state.batteries[i];
        let room = (cfg.battery_capacity - b) / cfg.eta_charge;
        battery_charge.push(cfg.battery_charge_max.min(pos(u - sum)).min(room.max(0.0)));
        let gap = pos(sum - u);
        let from_battery = gap.min(b / cfg.eta_discharge);
        wanted.push(pos(gap - from_battery).min(cfg.grid_draw_max));
    }
    // Emptier batteries get the grid first.
    let grid_draw = merit_order_fill(&wanted, &state.batteries, &net.topo, &net.headrooms());

    SlotDecision {
        assignment,
        rate_decisions,
        rates,
        battery_charge,
        grid_draw,
        battery_draw: Vec::new(),
        multipliers: Vec::new(),
    }
}

pub(crate) fn run_greedy_slot(
    net: &ChargingNetwork,
    state: &SystemState,
    inputs: &SlotInputs,
) -> Result<SlotOutcome, SchedulerError> {
    let decision = greedy_slot(net, state, inputs);
    let incoming = incoming_by_outlet(&net.fleet, inputs, &decision.assignment);
    advance(net, state, inputs, decision, &incoming, None)
}
