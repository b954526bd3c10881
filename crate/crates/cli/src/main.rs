use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use evcharge::config::{Config, Scenario};
use evcharge::ingest::trace::trace_start;
use evcharge::ingest::{synth_price, synth_wind_speed, Trace};
use evcharge::metrics::write_run_dir;
use evcharge::run_horizon;

#[derive(Parser)]
#[command(name = "evcharge", version, about = "EV charging network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, or a grid of scenarios with --sweep.
    Run(RunArgs),
    /// Print the derived constants and node headrooms of a scenario.
    Inspect(InspectArgs),
    /// Write synthetic hourly wind-speed and price traces.
    Traces(TraceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML). Defaults to the built-in 19-bus scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value`, applied in order. Dotted paths or aliases such as V, epsilon, B_max.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// `key=v1,v2,...`; several flags form a grid.
    #[arg(long = "sweep", value_name = "KEY=V1,V2,...")]
    sweeps: Vec<String>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "EVCHARGE_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long, default_value = "data")]
    out: PathBuf,
    #[arg(long, default_value_t = 61)]
    hours: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn load_config(path: Option<&Path>) -> Result<(Config, PathBuf)> {
    match path {
        Some(p) => {
            let cfg = Config::load(p)?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((cfg, base))
        }
        None => Ok((Config::default(), PathBuf::from("."))),
    }
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = spec
        .split_once('=')
        .with_context(|| format!("bad sweep {spec:?}: expected key=v1,v2,..."))?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        bail!("sweep {key:?} has no values");
    }
    Ok((key.trim().to_string(), values))
}

/// Every combination of sweep values, first key varying slowest.
fn grid(sweeps: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut points = vec![Vec::new()];
    for (key, values) in sweeps {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

fn dir_name(point: &[(String, String)]) -> String {
    point
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join("_")
        .replace(['/', '\\', ' '], "-")
}

struct RunSummary {
    time_average_cost: f64,
    max_overload_frequency: f64,
    mean_queue_total: f64,
}

fn run_one(cfg: Config, base: &Path, out: &Path) -> Result<RunSummary> {
    let scenario = Scenario::build(cfg, base)?;
    let (report, _) = run_horizon(
        &scenario.net,
        &scenario.init,
        &scenario.trace,
        &scenario.controller(),
        scenario.config.run.tail_fraction,
    )?;
    write_run_dir(out, &report, &scenario.net.topo, &scenario.metadata())
        .with_context(|| format!("writing reports to {}", out.display()))?;
    Ok(RunSummary {
        time_average_cost: report.time_average_cost,
        max_overload_frequency: report.max_overload_frequency(),
        mean_queue_total: report.mean_queue_total,
    })
}

fn run(args: RunArgs) -> Result<()> {
    let (mut cfg, base) = load_config(args.config.as_deref())?;
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(p) = &args.policy {
        cfg.apply_override(&format!("policy={p}"))?;
    }
    if let Some(s) = args.seed {
        cfg.apply_override(&format!("seed={s}"))?;
    }

    if args.sweeps.is_empty() {
        let s = run_one(cfg, &base, &args.out)?;
        println!(
            "{}: time_average_cost = {}",
            args.out.join("summary.txt").display(),
            s.time_average_cost
        );
        return Ok(());
    }

    let sweeps = args
        .sweeps
        .iter()
        .map(|s| parse_sweep(s))
        .collect::<Result<Vec<_>>>()?;
    // Build every config up front so a bad value fails before any run starts.
    let mut jobs = Vec::new();
    for point in grid(&sweeps) {
        let mut c = cfg.clone();
        for (k, v) in &point {
            c.apply_override(&format!("{k}={v}"))?;
        }
        jobs.push((dir_name(&point), c));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .context("starting worker pool")?;
    let results: Vec<Result<RunSummary>> = pool.install(|| {
        jobs.par_iter()
            .map(|(name, c)| {
                run_one(c.clone(), &base, &args.out.join(name)).with_context(|| format!("run {name}"))
            })
            .collect()
    });

    let mut index = String::from("run\ttime_average_cost\tmax_overload_frequency\tmean_queue_total\n");
    for ((name, _), r) in jobs.iter().zip(results) {
        let s = r?;
        let _ = writeln!(
            index,
            "{name}\t{}\t{}\t{}",
            s.time_average_cost, s.max_overload_frequency, s.mean_queue_total
        );
    }
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("sweep_index.txt");
    std::fs::write(&path, &index).with_context(|| format!("writing {}", path.display()))?;
    print!("{index}");
    Ok(())
}

fn inspect(args: InspectArgs) -> Result<()> {
    let (mut cfg, _) = load_config(args.config.as_deref())?;
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    let net = cfg.network()?;
    println!("stations = {}", net.fleet.len());
    println!("outlets = {}", net.fleet.total_outlets());
    println!("nodes = {}", net.topo.node_count());
    match evcharge::compute_constants(&net.fleet, &net.topo, &net.env, cfg.policy.lambda_max, cfg.policy.v) {
        Ok(k) => {
            println!("alpha_max = {}", k.alpha_max);
            println!("beta_max = {}", k.beta_max);
            println!("delta_max = {}", k.delta_max);
            println!("v_max = {}", k.v_max);
            println!("v = {}", k.v);
            println!("t_max = {}", k.t_max);
            println!("cost_gap = {}", k.cost_gap());
        }
        Err(e) => println!("constants: {e}"),
    }
    for (l, h) in net.headrooms().iter().enumerate() {
        println!("headroom_{l} = {h}");
    }
    Ok(())
}

fn traces(args: TraceArgs) -> Result<()> {
    let start = trace_start();
    std::fs::create_dir_all(&args.out)?;
    let wind = Trace::regular(
        "wind_speed_m_per_s",
        start,
        60,
        synth_wind_speed(args.hours, 8.0, 0.85, 1.5, args.seed),
    );
    let price = Trace::regular("price_usd_per_kwh", start, 60, synth_price(args.hours, 0.0, 0.2, args.seed));
    for (name, t) in [("wind.csv", &wind), ("price.csv", &price)] {
        let path = args.out.join(name);
        let mut buf = Vec::new();
        t.write(&mut buf)?;
        std::fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Inspect(a) => inspect(a),
        Command::Traces(a) => traces(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
