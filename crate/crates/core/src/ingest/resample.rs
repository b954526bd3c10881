//! Interpolation of sparse samples onto the slot grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResampleError {
    #[error("{method:?} interpolation needs at least {needed} points, got {got}")]
    InsufficientPoints {
        method: Method,
        needed: usize,
        got: usize,
    },
    #[error("timestamps must be strictly increasing (point {0})")]
    NonMonotone(usize),
    #[error("slot length must be positive")]
    BadStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Linear,
    CubicSpline,
}

impl Method {
    pub fn min_points(self) -> usize {
        match self {
            Method::Linear => 2,
            Method::CubicSpline => 4,
        }
    }
}

/// A fitted interpolant over knots `xs` (strictly increasing).
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots; empty for linear.
    m: Vec<f64>,
}

impl Interpolant {
    pub fn new(xs: &[f64], ys: &[f64], method: Method) -> Result<Self, ResampleError> {
        assert_eq!(xs.len(), ys.len(), "knot vectors differ in length");
        if xs.len() < method.min_points() {
            return Err(ResampleError::InsufficientPoints {
                method,
                needed: method.min_points(),
                got: xs.len(),
            });
        }
        if let Some(k) = (1..xs.len()).find(|&k| !(xs[k] > xs[k - 1])) {
            return Err(ResampleError::NonMonotone(k));
        }
        let m = match method {
            Method::Linear => Vec::new(),
            Method::CubicSpline => natural_second_derivatives(xs, ys),
        };
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    /// Value at `x`. Outside the knot range the end value is held.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.xs.partition_point(|&v| v <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        if x == x0 {
            return y0;
        }
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        if self.m.is_empty() {
            return a * y0 + b * y1;
        }
        let (m0, m1) = (self.m[k - 1], self.m[k]);
        a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0
    }
}

/// Natural boundary conditions, Thomas algorithm on the interior equations.
fn natural_second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    let inner = n - 2;
    let mut diag = vec![0.0; inner];
    let mut upper = vec![0.0; inner];
    let mut rhs = vec![0.0; inner];
    for r in 0..inner {
        let i = r + 1;
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        diag[r] = 2.0 * (h0 + h1);
        upper[r] = h1;
        rhs[r] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    for r in 1..inner {
        let lower = xs[r + 1] - xs[r];
        let w = lower / diag[r - 1];
        diag[r] -= w * upper[r - 1];
        rhs[r] -= w * rhs[r - 1];
    }
    for r in (0..inner).rev() {
        let next = if r + 1 < inner { m[r + 2] } else { 0.0 };
        m[r + 1] = (rhs[r] - upper[r] * next) / diag[r];
    }
    m
}

/// Samples the series at `x0, x0 + step, ...` up to the last knot.
pub fn resample(xs: &[f64], ys: &[f64], method: Method, step: f64) -> Result<Vec<f64>, ResampleError> {
    if !(step > 0.0) {
        return Err(ResampleError::BadStep);
    }
    let f = Interpolant::new(xs, ys, method)?;
    let (x0, x1) = (xs[0], xs[xs.len() - 1]);
    let count = ((x1 - x0) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| f.eval(x0 + k as f64 * step)).collect())
}
