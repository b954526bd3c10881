//! Seeded synthetic streams.
//!
//! Every generator uses `ChaCha8Rng::seed_from_u64(seed)` with its own stream
//! id, so the same seed yields the same numbers on every platform and the
//! streams stay independent of each other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::FeederTopology;

pub const STREAM_LOADS: u64 = 1;
pub const STREAM_ARRIVALS: u64 = 2;
pub const STREAM_WIND: u64 = 3;
pub const STREAM_PRICE: u64 = 4;
pub const STREAM_RENEWABLE: u64 = 5;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uncontrollable load per slot and node, `max(0, N(mean, std^2))`.
pub fn synth_loads(topo: &FeederTopology, slots: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, STREAM_LOADS);
    let dists: Vec<Normal<f64>> = topo
        .nodes()
        .iter()
        .map(|n| Normal::new(n.load_mean, n.load_std).expect("validated load statistics"))
        .collect();
    (0..slots)
        .map(|_| dists.iter().map(|d| d.sample(&mut rng).max(0.0)).collect())
        .collect()
}

/// Demand size law: uniform on `(min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandDist {
    pub min: f64,
    pub max: f64,
}

impl DemandDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.max - u * (self.max - self.min)
    }
}

/// Demand registered at each of `entry_points` per slot; zero means nobody
/// showed up. Each entry point sees an arrival with probability `p`.
pub fn synth_arrivals(entry_points: usize, p: f64, demand: DemandDist, slots: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, STREAM_ARRIVALS);
    let coin = Bernoulli::new(p.clamp(0.0, 1.0)).expect("clamped probability");
    (0..slots)
        .map(|_| {
            (0..entry_points)
                .map(|_| {
                    if coin.sample(&mut rng) {
                        demand.sample(&mut rng)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Hourly wind speed in m/s from a mean-reverting AR(1) process, floored at 0.
pub fn synth_wind_speed(hours: usize, mean: f64, persistence: f64, noise_std: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, STREAM_WIND);
    let noise = Normal::new(0.0, noise_std).expect("nonnegative noise");
    let mut w = mean;
    (0..hours)
        .map(|_| {
            w = mean + persistence * (w - mean) + noise.sample(&mut rng);
            w = w.max(0.0);
            w
        })
        .collect()
}

/// Hourly price with a daily cycle peaking in the early evening plus noise,
/// clamped to `[lo, hi]`.
pub fn synth_price(hours: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, STREAM_PRICE);
    let mid = 0.5 * (lo + hi);
    let amp = 0.35 * (hi - lo);
    let noise = Normal::new(0.0, 0.08 * (hi - lo)).expect("nonnegative noise");
    (0..hours)
        .map(|h| {
            let phase = 2.0 * std::f64::consts::PI * ((h % 24) as f64 - 12.0) / 24.0;
            (mid + amp * phase.sin() + noise.sample(&mut rng)).clamp(lo, hi)
        })
        .collect()
}

/// `count` i.i.d. draws, uniform on `[lo, hi]`.
pub fn synth_uniform(count: usize, lo: f64, hi: f64, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, stream);
    (0..count).map(|_| rng.random_range(lo..=hi)).collect()
}
