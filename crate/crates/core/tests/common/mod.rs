//! Oracles and fixtures shared by the integration tests. Nothing here calls
//! into the solver code it is used to check.

#![allow(dead_code)]

use evcharge::bounds::EnvBounds;
use evcharge::dual::GridProblem;
use evcharge::model::{FeederNode, FeederTopology, SlotInputs, StationConfig, StationFleet, SystemState};
use evcharge::scheduler::ChargingNetwork;
use evcharge::{compute_constants, DualConfig, LyapunovConstants};
use rand::Rng;

/// Owned data behind a [`GridProblem`].
#[derive(Debug, Clone)]
pub struct GridInstance {
    pub topo: FeederTopology,
    pub fleet: StationFleet,
    pub shifted: Vec<f64>,
    pub gaps: Vec<f64>,
    pub price: f64,
    pub v: f64,
    pub headrooms: Vec<f64>,
}

impl GridInstance {
    pub fn problem(&self) -> GridProblem<'_> {
        GridProblem {
            topo: &self.topo,
            fleet: &self.fleet,
            shifted: self.shifted.clone(),
            demand_gaps: self.gaps.clone(),
            price: self.price,
            v: self.v,
            headrooms: self.headrooms.clone(),
        }
    }

    pub fn coefficient(&self, i: usize) -> f64 {
        self.shifted[i] * self.fleet[i].eta_discharge + self.v * self.price
    }

    pub fn cap(&self, i: usize) -> f64 {
        self.gaps[i].min(self.fleet[i].grid_draw_max).max(0.0)
    }
}

/// A random radial feeder: node `l > 0` hangs off a random earlier node and
/// each station attaches to one random node; a station counts under every
/// node on its path to the root.
pub fn random_radial(rng: &mut impl Rng, nodes: usize, stations: usize, caps: &[f64]) -> FeederTopology {
    let parents: Vec<Option<usize>> = (0..nodes)
        .map(|l| if l == 0 { None } else { Some(rng.random_range(0..l)) })
        .collect();
    let bus: Vec<usize> = (0..stations).map(|_| rng.random_range(0..nodes)).collect();
    let mut rows = vec![Vec::new(); nodes];
    for (i, &b) in bus.iter().enumerate() {
        let mut cur = Some(b);
        while let Some(l) = cur {
            rows[l].push(i);
            cur = parents[l];
        }
    }
    let nodes = rows
        .into_iter()
        .enumerate()
        .map(|(l, stations)| FeederNode {
            capacity: caps[l],
            load_mean: 0.0,
            load_std: 0.0,
            stations,
        })
        .collect();
    FeederTopology::new(nodes, stations).expect("random radial feeder is valid")
}

pub fn station(outlets: usize, rate_max: f64, capacity: f64, grid_draw_max: f64) -> StationConfig {
    StationConfig {
        outlets,
        rate_max,
        battery_capacity: capacity,
        battery_charge_max: capacity,
        grid_draw_max,
        eta_charge: 1.0,
        eta_discharge: 1.0,
    }
}

/// Single-slot grid instance with up to 3 nodes and 4 stations. Headroom is
/// drawn so that some instances are slack, some congested and some negative.
pub fn random_grid_instance(rng: &mut impl Rng) -> GridInstance {
    let nodes = rng.random_range(1..=3);
    let stations = rng.random_range(1..=4);
    let headrooms: Vec<f64> = (0..nodes)
        .map(|_| {
            if rng.random_bool(0.1) {
                -rng.random_range(0.0..20.0)
            } else {
                rng.random_range(0.0..80.0)
            }
        })
        .collect();
    // With zero load statistics the headroom equals the capacity.
    let caps: Vec<f64> = headrooms.iter().map(|h| h.max(1e-3)).collect();
    let topo = random_radial(rng, nodes, stations, &caps);
    let fleet = StationFleet::new(
        (0..stations)
            .map(|_| {
                let mut s = station(3, 20.0, 500.0, rng.random_range(20.0..60.0));
                s.eta_discharge = rng.random_range(1.0..1.2);
                s
            })
            .collect(),
    )
    .unwrap();
    GridInstance {
        topo,
        fleet,
        shifted: (0..stations).map(|_| rng.random_range(-300.0..50.0)).collect(),
        gaps: (0..stations)
            .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..60.0) })
            .collect(),
        price: rng.random_range(0.0..0.2),
        v: rng.random_range(1.0..1000.0),
        headrooms,
    }
}

/// Greedy fill in increasing coefficient order under every upstream node's
/// remaining headroom (negative headroom counts as zero).
pub fn fill_oracle(inst: &GridInstance, requested: &[f64]) -> Vec<f64> {
    let n = requested.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| inst.coefficient(a).partial_cmp(&inst.coefficient(b)).unwrap().then(a.cmp(&b)));
    let mut left: Vec<f64> = inst.headrooms.iter().map(|h| h.max(0.0)).collect();
    let mut out = vec![0.0; n];
    for i in order {
        let mut x = requested[i];
        for l in 0..inst.topo.node_count() {
            if inst.topo.incidence(l, i) {
                x = x.min(left[l]);
            }
        }
        let x = x.max(0.0);
        for l in 0..inst.topo.node_count() {
            if inst.topo.incidence(l, i) {
                left[l] -= x;
            }
        }
        out[i] = x;
    }
    out
}

pub fn cost(inst: &GridInstance, draws: &[f64]) -> f64 {
    draws.iter().enumerate().map(|(i, d)| d * inst.coefficient(i)).sum()
}

/// Cheapest repaired draw over every bang-bang pattern `D_i in {0, cap_i}`.
pub fn enumerate_bang_bang(inst: &GridInstance) -> (f64, Vec<f64>) {
    let n = inst.fleet.len();
    let mut best = (f64::INFINITY, vec![0.0; n]);
    for mask in 0u32..(1 << n) {
        let req: Vec<f64> = (0..n)
            .map(|i| if mask >> i & 1 == 1 { inst.cap(i) } else { 0.0 })
            .collect();
        let d = fill_oracle(inst, &req);
        let c = cost(inst, &d);
        if c < best.0 {
            best = (c, d);
        }
    }
    best
}

/// The one-station, one-outlet network used by the hand ledger.
pub struct Ledger {
    pub net: ChargingNetwork,
    pub init: SystemState,
    pub trace: Vec<SlotInputs>,
    pub consts: LyapunovConstants,
    pub dual: DualConfig,
}

/// Station: 1 outlet, r_max 10, B_max 200, R_max 50, D_max 10, lossless.
/// Node: capacity 100, mean load 20, deviation 10, epsilon 0.5 -> headroom 70.
/// V = 100, C_max = 1, lambda_max = 1 -> T_max = 101, H = B - 111.
pub fn ledger() -> Ledger {
    let cfg = StationConfig {
        outlets: 1,
        rate_max: 10.0,
        battery_capacity: 200.0,
        battery_charge_max: 50.0,
        grid_draw_max: 10.0,
        eta_charge: 1.0,
        eta_discharge: 1.0,
    };
    let topo = FeederTopology::new(
        vec![FeederNode {
            capacity: 100.0,
            load_mean: 20.0,
            load_std: 10.0,
            stations: vec![0],
        }],
        1,
    )
    .unwrap();
    let env = EnvBounds {
        e_max: 20.0,
        u_max: 50.0,
        c_min: 0.0,
        c_max: 1.0,
    };
    let fleet = StationFleet::uniform(1, cfg).unwrap();
    let consts = compute_constants(&fleet, &topo, &env, 1.0, Some(100.0)).unwrap();
    let net = ChargingNetwork::new(topo, fleet, env, 0.5).unwrap();
    let init = SystemState::new(&net.fleet, vec![100.0]).unwrap();
    let slot = |arrival: f64, renewable: f64, price: f64| SlotInputs {
        arrivals: vec![arrival],
        renewable: vec![renewable],
        price,
        loads: vec![20.0],
    };
    Ledger {
        net,
        init,
        trace: vec![slot(15.0, 0.0, 0.5), slot(12.0, 18.0, 0.1), slot(0.0, 0.0, 0.01)],
        consts,
        dual: DualConfig::default(),
    }
}

/// Parameters of the tiny offline-comparison instance.
pub struct TinyInstance {
    pub net: ChargingNetwork,
    pub consts: LyapunovConstants,
    pub init: SystemState,
    pub trace: Vec<SlotInputs>,
}

/// One node, one station with two outlets, eight slots of i.i.d. inputs.
/// V is drawn from [0.1, 1] V_max so some runs lean on the grid.
pub fn tiny_instance(rng: &mut impl Rng) -> TinyInstance {
    let cfg = StationConfig {
        outlets: 2,
        rate_max: 5.0,
        battery_capacity: 100.0,
        battery_charge_max: 10.0,
        grid_draw_max: 10.0,
        eta_charge: 1.0,
        eta_discharge: 1.0,
    };
    let topo = FeederTopology::new(
        vec![FeederNode {
            capacity: 100.0,
            load_mean: 20.0,
            load_std: 10.0,
            stations: vec![0],
        }],
        1,
    )
    .unwrap();
    let env = EnvBounds {
        e_max: 10.0,
        u_max: 10.0,
        c_min: 0.0,
        c_max: 0.1,
    };
    let fleet = StationFleet::uniform(1, cfg).unwrap();
    let v_max = compute_constants(&fleet, &topo, &env, 1.0, None).unwrap().v_max;
    let v = v_max * rng.random_range(0.1..=1.0);
    let consts = compute_constants(&fleet, &topo, &env, 1.0, Some(v)).unwrap();
    let net = ChargingNetwork::new(topo, fleet, env, 0.5).unwrap();
    let init = SystemState::new(&net.fleet, vec![rng.random_range(10.0..100.0)]).unwrap();
    let trace = (0..8)
        .map(|_| SlotInputs {
            arrivals: (0..2)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        10.0 - rng.random_range(0.0..10.0)
                    } else {
                        0.0
                    }
                })
                .collect(),
            renewable: vec![rng.random_range(0.0..=4.0)],
            price: rng.random_range(0.0..=0.1),
            loads: vec![20.0],
        })
        .collect();
    TinyInstance {
        net,
        consts,
        init,
        trace,
    }
}

struct Offline<'a> {
    cfg: &'a StationConfig,
    trace: &'a [SlotInputs],
    headroom: f64,
    target: f64,
    best: f64,
}

impl Offline<'_> {
    fn dfs(&mut self, t: usize, queues: [f64; 2], b: f64, cost: f64, delivered: f64) {
        const TOL: f64 = 1e-9;
        if cost >= self.best {
            return;
        }
        let slots_left = (self.trace.len() - t) as f64;
        let pending: f64 = queues.iter().sum::<f64>()
            + self.trace[t..]
                .iter()
                .flat_map(|s| s.arrivals.iter())
                .sum::<f64>();
        let reachable = delivered + pending.min(slots_left * 2.0 * self.cfg.rate_max);
        if reachable + TOL < self.target {
            return;
        }
        if t == self.trace.len() {
            if delivered + TOL >= self.target {
                self.best = cost;
            }
            return;
        }
        let input = &self.trace[t];

        // Admission: largest request first onto the lowest free outlet.
        let mut incoming = [0.0; 2];
        let mut requests: Vec<f64> = input.arrivals.iter().copied().filter(|&e| e > 0.0).collect();
        requests.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut requests = requests.into_iter();
        for j in 0..2 {
            if queues[j] == 0.0 {
                if let Some(e) = requests.next() {
                    incoming[j] = e;
                }
            }
        }
        let remaining = [queues[0] + incoming[0], queues[1] + incoming[1]];

        let rate_opts = |j: usize| -> Vec<f64> {
            if remaining[j] > 0.0 {
                vec![self.cfg.rate_max.min(remaining[j]), 0.0]
            } else {
                vec![0.0]
            }
        };
        let u = input.renewable[0];
        for r0 in rate_opts(0) {
            for r1 in rate_opts(1) {
                let sum = r0 + r1;
                let gap = (sum - u).max(0.0);
                let surplus = (u - sum).max(0.0);
                let next_q = [remaining[0] - r0, remaining[1] - r1];
                let next_q = next_q.map(|q| if q.abs() < 1e-12 { 0.0 } else { q });
                if gap > 0.0 {
                    let d_max = gap.min(self.cfg.grid_draw_max).min(self.headroom.max(0.0));
                    for d in [0.0, d_max] {
                        let from_battery = gap - d;
                        if from_battery > b + TOL {
                            continue;
                        }
                        self.dfs(t + 1, next_q, (b - from_battery).max(0.0), cost + input.price * d, delivered + sum);
                    }
                } else {
                    let room = self.cfg.battery_capacity - b;
                    let r_max = surplus.min(self.cfg.battery_charge_max).min(room);
                    let mut opts = vec![r_max];
                    if r_max > 0.0 {
                        opts.push(0.0);
                    }
                    for r in opts {
                        self.dfs(t + 1, next_q, b + r, cost, delivered + sum);
                    }
                }
            }
        }
    }
}

/// Least total cost of any discretized schedule on the tiny instance that
/// delivers at least `target` kWh. Rates are `0` or the full rate, storage
/// input `0` or its largest feasible value, grid draw `0` or the largest
/// admissible value with the battery covering the rest.
pub fn offline_optimum(inst: &TinyInstance, target: f64) -> f64 {
    let mut search = Offline {
        cfg: inst.net.fleet.get(0),
        trace: &inst.trace,
        headroom: inst.net.headrooms()[0],
        target,
        best: f64::INFINITY,
    };
    search.dfs(0, [0.0, 0.0], inst.init.batteries[0], 0.0, 0.0);
    search.best
}
