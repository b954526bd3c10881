//! Trace loading and synthesis.

pub mod power_curve;
pub mod resample;
pub mod synth;
pub mod trace;

pub use power_curve::{wind_to_power, CurveError, PowerCurve};
pub use resample::{resample, Interpolant, Method, ResampleError};
pub use synth::{synth_arrivals, synth_loads, synth_price, synth_uniform, synth_wind_speed, DemandDist};
pub use trace::{Trace, TraceError};
