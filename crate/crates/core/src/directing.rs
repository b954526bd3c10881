//! Central controller: match waiting vehicles at entry points to empty outlets.

use std::cmp::Ordering;

use crate::model::{OutletId, SlotInputs, StationFleet, SystemState};

/// Pending demands and free outlets for one slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchInput {
    /// `(k, E_k)` for every entry point with a positive demand.
    pub pending: Vec<(usize, f64)>,
    /// `(outlet, H_i * eta^-)` for every outlet with an empty queue.
    pub free: Vec<(OutletId, f64)>,
}

impl MatchInput {
    pub fn from_state(
        state: &SystemState,
        inputs: &SlotInputs,
        fleet: &StationFleet,
        shifted: &[f64],
    ) -> Self {
        let pending = inputs
            .arrivals
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0.0)
            .map(|(k, &e)| (k, e))
            .collect();
        let free = fleet
            .outlet_ids()
            .filter(|&id| state.queue(id) == 0.0)
            .map(|id| (id, shifted[id.station] * fleet[id.station].eta_discharge))
            .collect();
        Self { pending, free }
    }
}

/// Greedy matching: take the largest remaining demand, give it the free
/// outlet maximizing `E_k + H_i eta^-`, remove both, repeat.
///
/// Ties go to the lower entry point index and the lower `(station, outlet)`.
/// The pair score is unconditional, so a negative score still matches.
pub fn direct(input: &MatchInput) -> Vec<(usize, OutletId)> {
    let mut pending = input.pending.clone();
    pending.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut free = input.free.clone();
    let mut matches = Vec::with_capacity(pending.len().min(free.len()));
    for (k, demand) in pending {
        // E_k is common to every candidate, so only the station term ranks them.
        let best = free
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| match (demand + a.1).total_cmp(&(demand + b.1)) {
                Ordering::Equal => b.0.cmp(&a.0),
                o => o,
            })
            .map(|(pos, _)| pos);
        let Some(pos) = best else { break };
        let (outlet, _) = free.swap_remove(pos);
        matches.push((k, outlet));
    }
    matches
}
