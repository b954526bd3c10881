//! Per-slot grid consumption: a projected subgradient loop on the node
//! multipliers, with each station solving its own linear subproblem.
//!
//! For multipliers `lambda`, station `i` minimizes
//! `D_i (H_i eta^- + V c + sum_{l: X_li = 1} lambda_l)` over `[0, cap_i]`
//! where `cap_i = min{(sum_j r_ij - U_i)^+, D^{d,max}}`. Nodes then move their
//! multiplier along the headroom residual. A finite number of iterations does
//! not guarantee the node caps, so every iterate is also pushed through a
//! merit-order fill that enforces them exactly, and the cheapest repaired
//! iterate is returned.

use serde::{Deserialize, Serialize};

use crate::model::{FeederTopology, StationConfig, StationFleet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualConfig {
    /// Constant step size `kappa`.
    pub step: f64,
    /// Iteration budget `M`.
    pub max_iters: usize,
    /// Stop once the dual objective moves less than this between iterates.
    pub tol: f64,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self {
            step: 0.01,
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

impl DualConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.step > 0.0) {
            return Err(format!("step must be positive, got {}", self.step));
        }
        if self.max_iters == 0 {
            return Err("max_iters must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return Err(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }
}

/// Grid draw of one station for a fixed multiplier sum. Zero coefficient
/// prefers the battery.
pub fn station_subproblem(
    h: f64,
    price: f64,
    v: f64,
    lambda_sum: f64,
    demand_gap: f64,
    cfg: &StationConfig,
) -> f64 {
    let coefficient = h * cfg.eta_discharge + v * price + lambda_sum;
    if coefficient >= 0.0 {
        0.0
    } else {
        demand_gap.min(cfg.grid_draw_max).max(0.0)
    }
}

/// Projected gradient step on one node multiplier.
pub fn update_multiplier(lambda: f64, step: f64, headroom: f64, draw_sum: f64) -> f64 {
    (lambda - step * (headroom - draw_sum)).max(0.0)
}

/// Fills the requested draws in merit order (lowest `priority` first, ties by
/// station index), giving each station as much as every upstream node still
/// allows. Negative headroom is treated as zero.
pub fn merit_order_fill(
    requested: &[f64],
    priority: &[f64],
    topo: &FeederTopology,
    headrooms: &[f64],
) -> Vec<f64> {
    let mut order: Vec<usize> = (0..requested.len()).collect();
    order.sort_by(|&a, &b| priority[a].total_cmp(&priority[b]).then(a.cmp(&b)));
    let mut residual: Vec<f64> = headrooms.iter().map(|h| h.max(0.0)).collect();
    let mut out = vec![0.0; requested.len()];
    for i in order {
        if requested[i] <= 0.0 {
            continue;
        }
        let allowed = topo
            .upstream(i)
            .iter()
            .map(|&l| residual[l])
            .fold(requested[i], f64::min)
            .max(0.0);
        for &l in topo.upstream(i) {
            residual[l] = (residual[l] - allowed).max(0.0);
        }
        out[i] = allowed;
    }
    out
}

/// Everything the grid-draw decision depends on in one slot.
#[derive(Debug, Clone)]
pub struct GridProblem<'a> {
    pub topo: &'a FeederTopology,
    pub fleet: &'a StationFleet,
    /// `H_i`
    pub shifted: Vec<f64>,
    /// `(sum_j r_ij - U_i)^+`
    pub demand_gaps: Vec<f64>,
    pub price: f64,
    pub v: f64,
    /// Node headrooms; negative entries forbid any draw below that node.
    pub headrooms: Vec<f64>,
}

impl GridProblem<'_> {
    /// Multiplier-free cost coefficient `H_i eta^- + V c`.
    pub fn coefficient(&self, i: usize) -> f64 {
        self.shifted[i] * self.fleet[i].eta_discharge + self.v * self.price
    }

    pub fn cap(&self, i: usize) -> f64 {
        self.demand_gaps[i].min(self.fleet[i].grid_draw_max).max(0.0)
    }

    /// `sum_i D_i (H_i eta^- + V c)`
    pub fn primal_cost(&self, draws: &[f64]) -> f64 {
        draws
            .iter()
            .enumerate()
            .map(|(i, d)| d * self.coefficient(i))
            .sum()
    }

    /// Clamped headroom actually offered to the dual.
    fn budget(&self, l: usize) -> f64 {
        self.headrooms[l].max(0.0)
    }

    /// Lagrangian at `(draws, lambda)`; the dual function when `draws`
    /// minimizes it.
    pub fn lagrangian(&self, draws: &[f64], lambda: &[f64]) -> f64 {
        let mut value = self.primal_cost(draws);
        for (l, &lam) in lambda.iter().enumerate() {
            let load: f64 = self.topo.downstream(l).iter().map(|&i| draws[i]).sum();
            value += lam * (load - self.budget(l));
        }
        value
    }

    /// Station best responses for the given multipliers.
    pub fn best_response(&self, lambda: &[f64]) -> Vec<f64> {
        (0..self.fleet.len())
            .map(|i| {
                let lambda_sum: f64 = self.topo.upstream(i).iter().map(|&l| lambda[l]).sum();
                station_subproblem(
                    self.shifted[i],
                    self.price,
                    self.v,
                    lambda_sum,
                    self.demand_gaps[i],
                    &self.fleet[i],
                )
            })
            .collect()
    }

    /// Projects raw draws onto the node caps, most valuable stations first.
    pub fn repair(&self, draws: &[f64]) -> Vec<f64> {
        let priority: Vec<f64> = (0..draws.len()).map(|i| self.coefficient(i)).collect();
        merit_order_fill(draws, &priority, self.topo, &self.headrooms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualOutcome {
    /// Repaired draws of the cheapest iterate; satisfy every node cap.
    pub draws: Vec<f64>,
    /// Multipliers after the last iteration.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Dual function value at each iterate.
    pub dual_values: Vec<f64>,
    /// Best dual value seen.
    pub best_dual: f64,
    /// Primal cost of the returned draws.
    pub primal_cost: f64,
}

impl DualOutcome {
    /// Upper estimate of the duality gap: returned primal minus best dual.
    pub fn gap_estimate(&self) -> f64 {
        self.primal_cost - self.best_dual
    }

    pub fn max_multiplier(&self) -> f64 {
        self.multipliers.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs the multiplier loop from `lambda_init` on every node.
pub fn solve_grid_draws(problem: &GridProblem<'_>, lambda_init: f64, cfg: &DualConfig) -> DualOutcome {
    let nodes = problem.topo.node_count();
    let mut lambda = vec![lambda_init; nodes];

    if (0..problem.fleet.len()).all(|i| problem.cap(i) == 0.0) {
        let draws = vec![0.0; problem.fleet.len()];
        let value = problem.lagrangian(&draws, &lambda);
        return DualOutcome {
            draws,
            multipliers: lambda,
            iterations: 1,
            converged: true,
            dual_values: vec![value],
            best_dual: value,
            primal_cost: 0.0,
        };
    }

    let mut dual_values = Vec::with_capacity(cfg.max_iters.min(1024));
    let mut best_dual = f64::NEG_INFINITY;
    let mut best_draws = Vec::new();
    let mut best_cost = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for n in 0..cfg.max_iters {
        iterations = n + 1;
        let raw = problem.best_response(&lambda);
        let value = problem.lagrangian(&raw, &lambda);
        best_dual = best_dual.max(value);

        let repaired = problem.repair(&raw);
        let cost = problem.primal_cost(&repaired);
        if cost < best_cost {
            best_cost = cost;
            best_draws = repaired;
        }

        let settled = dual_values
            .last()
            .is_some_and(|&prev: &f64| (value - prev).abs() < cfg.tol);
        dual_values.push(value);
        if settled {
            converged = true;
            break;
        }
        if n + 1 == cfg.max_iters {
            break;
        }
        for (l, lam) in lambda.iter_mut().enumerate() {
            let load: f64 = problem.topo.downstream(l).iter().map(|&i| raw[i]).sum();
            *lam = update_multiplier(*lam, cfg.step, problem.budget(l), load);
        }
    }

    DualOutcome {
        draws: best_draws,
        multipliers: lambda,
        iterations,
        converged,
        dual_values,
        best_dual,
        primal_cost: best_cost,
    }
}
