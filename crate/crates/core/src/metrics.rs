//! Per-slot records, run aggregates, and the two report files.
//!
//! `report.csv` has one row per slot with a fixed column order:
//! `slot,price,cost,grid_total,delivered,renewable_direct,renewable_stored,
//! battery_discharge,curtailed,queue_total,queue_max,arrivals,admitted,blocked,
//! completed,dual_iterations,dual_converged,max_multiplier`, then
//! `battery_<i>` per station, `node_grid_<l>`, `node_load_<l>` and
//! `overload_<l>` per node. `summary.txt` holds `key = value` lines.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::model::FeederTopology;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub gap_estimate: f64,
    pub max_multiplier: f64,
}

/// Everything observed in one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub price: f64,
    /// `c(t) * sum_i D_i^d(t)`
    pub cost: f64,
    pub grid_draw: Vec<f64>,
    /// Grid draw seen by each node.
    pub node_grid_load: Vec<f64>,
    /// Realized uncontrollable load per node.
    pub node_load: Vec<f64>,
    pub overload: Vec<bool>,
    /// Battery levels at the end of the slot.
    pub batteries: Vec<f64>,
    pub queue_total: f64,
    pub queue_max: f64,
    pub delivered: f64,
    pub renewable_direct: f64,
    pub renewable_stored: f64,
    pub battery_discharge: f64,
    pub curtailed: f64,
    pub arrivals: usize,
    pub admitted: usize,
    pub blocked: usize,
    /// Waiting time of every vehicle that finished this slot, in slots per kWh.
    pub waits: Vec<f64>,
    pub dual: Option<DualDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct WaitStats {
    pub count: usize,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

impl WaitStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = |p: f64| sorted[((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        Self {
            count: sorted.len(),
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p50: rank(0.5),
            p90: rank(0.9),
            max: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DualStats {
    pub slots: usize,
    pub converged_fraction: f64,
    pub mean_iterations: f64,
    pub max_multiplier: f64,
    pub mean_gap_estimate: f64,
}

/// Aggregates of a finished run plus the records they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub slots: usize,
    pub total_cost: f64,
    /// `sum_t sum_i c(t) D_i^d(t) / tau`
    pub time_average_cost: f64,
    pub overload_counts: Vec<usize>,
    pub overload_frequency: Vec<f64>,
    pub waits: WaitStats,
    /// Mean battery level per station over the tail window.
    pub steady_battery: Vec<f64>,
    pub tail_slots: usize,
    /// Time average of the total queue backlog.
    pub mean_queue_total: f64,
    pub max_queue: f64,
    pub delivered_total: f64,
    pub curtailed_total: f64,
    pub arrivals_total: usize,
    pub admitted_total: usize,
    pub blocked_total: usize,
    pub dual: DualStats,
    #[serde(skip)]
    pub records: Vec<SlotRecord>,
}

impl RunReport {
    pub fn max_overload_frequency(&self) -> f64 {
        self.overload_frequency.iter().copied().fold(0.0, f64::max)
    }

    /// Battery level of station `i` at the end of every slot.
    pub fn battery_trajectory(&self, i: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.batteries[i]).collect()
    }

    pub fn queue_trajectory(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.queue_total).collect()
    }

    /// Running average of the total backlog after each slot.
    pub fn queue_running_average(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.records
            .iter()
            .enumerate()
            .map(|(t, r)| {
                acc += r.queue_total;
                acc / (t + 1) as f64
            })
            .collect()
    }

    pub fn wait_samples(&self) -> Vec<f64> {
        self.records.iter().flat_map(|r| r.waits.iter().copied()).collect()
    }
}

/// Folds slot records into a report. `tail_fraction` sets the share of the
/// final slots averaged into the steady-state battery level.
pub fn aggregate(topo: &FeederTopology, records: Vec<SlotRecord>, tail_fraction: f64) -> RunReport {
    let slots = records.len();
    let nodes = topo.node_count();
    let stations = topo.station_count();
    let per_slot = |x: f64| if slots == 0 { 0.0 } else { x / slots as f64 };

    let total_cost: f64 = records.iter().map(|r| r.cost).sum();
    let mut overload_counts = vec![0usize; nodes];
    for r in &records {
        for (c, &o) in overload_counts.iter_mut().zip(&r.overload) {
            *c += o as usize;
        }
    }
    let overload_frequency = overload_counts.iter().map(|&c| per_slot(c as f64)).collect();

    let waits: Vec<f64> = records.iter().flat_map(|r| r.waits.iter().copied()).collect();

    let tail_slots = if slots == 0 {
        0
    } else {
        ((slots as f64 * tail_fraction.clamp(0.0, 1.0)).round() as usize).clamp(1, slots)
    };
    let mut steady_battery = vec![0.0; stations];
    for r in &records[slots - tail_slots..] {
        for (acc, b) in steady_battery.iter_mut().zip(&r.batteries) {
            *acc += b;
        }
    }
    if tail_slots > 0 {
        steady_battery.iter_mut().for_each(|b| *b /= tail_slots as f64);
    }

    let diag: Vec<DualDiagnostics> = records.iter().filter_map(|r| r.dual).collect();
    let dual = if diag.is_empty() {
        DualStats::default()
    } else {
        let n = diag.len() as f64;
        DualStats {
            slots: diag.len(),
            converged_fraction: diag.iter().filter(|d| d.converged).count() as f64 / n,
            mean_iterations: diag.iter().map(|d| d.iterations as f64).sum::<f64>() / n,
            max_multiplier: diag.iter().map(|d| d.max_multiplier).fold(0.0, f64::max),
            mean_gap_estimate: diag.iter().map(|d| d.gap_estimate).sum::<f64>() / n,
        }
    };

    RunReport {
        slots,
        total_cost,
        time_average_cost: per_slot(total_cost),
        overload_counts,
        overload_frequency,
        waits: WaitStats::from_samples(&waits),
        steady_battery,
        tail_slots,
        mean_queue_total: per_slot(records.iter().map(|r| r.queue_total).sum()),
        max_queue: records.iter().map(|r| r.queue_max).fold(0.0, f64::max),
        delivered_total: records.iter().map(|r| r.delivered).sum(),
        curtailed_total: records.iter().map(|r| r.curtailed).sum(),
        arrivals_total: records.iter().map(|r| r.arrivals).sum(),
        admitted_total: records.iter().map(|r| r.admitted).sum(),
        blocked_total: records.iter().map(|r| r.blocked).sum(),
        dual,
        records,
    }
}

pub fn write_report_csv<W: Write>(mut w: W, report: &RunReport, topo: &FeederTopology) -> io::Result<()> {
    let mut header = String::from(
        "slot,price,cost,grid_total,delivered,renewable_direct,renewable_stored,\
         battery_discharge,curtailed,queue_total,queue_max,arrivals,admitted,blocked,\
         completed,dual_iterations,dual_converged,max_multiplier",
    );
    for i in 0..topo.station_count() {
        let _ = write!(header, ",battery_{i}");
    }
    for prefix in ["node_grid", "node_load", "overload"] {
        for l in 0..topo.node_count() {
            let _ = write!(header, ",{prefix}_{l}");
        }
    }
    writeln!(w, "{header}")?;

    let mut line = String::new();
    for r in &report.records {
        line.clear();
        let (iters, conv, mult) = match r.dual {
            Some(d) => (d.iterations, d.converged as u8, d.max_multiplier),
            None => (0, 0, 0.0),
        };
        let _ = write!(
            line,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.slot,
            r.price,
            r.cost,
            r.grid_draw.iter().sum::<f64>(),
            r.delivered,
            r.renewable_direct,
            r.renewable_stored,
            r.battery_discharge,
            r.curtailed,
            r.queue_total,
            r.queue_max,
            r.arrivals,
            r.admitted,
            r.blocked,
            r.waits.len(),
            iters,
            conv,
            mult
        );
        for b in &r.batteries {
            let _ = write!(line, ",{b}");
        }
        for g in &r.node_grid_load {
            let _ = write!(line, ",{g}");
        }
        for n in &r.node_load {
            let _ = write!(line, ",{n}");
        }
        for &o in &r.overload {
            let _ = write!(line, ",{}", o as u8);
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Writes `meta` first, then the aggregates, one `key = value` per line.
pub fn write_summary<W: Write>(mut w: W, report: &RunReport, meta: &[(String, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "{k} = {v}")?;
    }
    let mut kv = |k: &str, v: String| writeln!(w, "{k} = {v}");
    kv("slots", report.slots.to_string())?;
    kv("total_cost", report.total_cost.to_string())?;
    kv("time_average_cost", report.time_average_cost.to_string())?;
    kv("delivered_total", report.delivered_total.to_string())?;
    kv("curtailed_total", report.curtailed_total.to_string())?;
    kv("arrivals_total", report.arrivals_total.to_string())?;
    kv("admitted_total", report.admitted_total.to_string())?;
    kv("blocked_total", report.blocked_total.to_string())?;
    kv("mean_queue_total", report.mean_queue_total.to_string())?;
    kv("max_queue", report.max_queue.to_string())?;
    kv("wait_count", report.waits.count.to_string())?;
    kv("wait_mean", report.waits.mean.to_string())?;
    kv("wait_p50", report.waits.p50.to_string())?;
    kv("wait_p90", report.waits.p90.to_string())?;
    kv("wait_max", report.waits.max.to_string())?;
    kv("max_overload_frequency", report.max_overload_frequency().to_string())?;
    for (l, (c, f)) in report
        .overload_counts
        .iter()
        .zip(&report.overload_frequency)
        .enumerate()
    {
        kv(&format!("overload_count_{l}"), c.to_string())?;
        kv(&format!("overload_frequency_{l}"), f.to_string())?;
    }
    kv("tail_slots", report.tail_slots.to_string())?;
    for (i, b) in report.steady_battery.iter().enumerate() {
        kv(&format!("steady_battery_{i}"), b.to_string())?;
    }
    kv("dual_slots", report.dual.slots.to_string())?;
    kv("dual_converged_fraction", report.dual.converged_fraction.to_string())?;
    kv("dual_mean_iterations", report.dual.mean_iterations.to_string())?;
    kv("dual_max_multiplier", report.dual.max_multiplier.to_string())?;
    kv("dual_mean_gap_estimate", report.dual.mean_gap_estimate.to_string())?;
    Ok(())
}

/// Writes `report.csv` and `summary.txt` into `dir`, creating it if needed.
pub fn write_run_dir(
    dir: &Path,
    report: &RunReport,
    topo: &FeederTopology,
    meta: &[(String, String)],
) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv = io::BufWriter::new(std::fs::File::create(dir.join("report.csv"))?);
    write_report_csv(csv, report, topo)?;
    let summary = io::BufWriter::new(std::fs::File::create(dir.join("summary.txt"))?);
    write_summary(summary, report, meta)
}
