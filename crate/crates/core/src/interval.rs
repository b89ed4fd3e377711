//! Interval arithmetic with outward rounding.
//!
//! Every operation widens its result by at least one ulp on each side so that
//! enclosures stay sound under floating-point rounding.

use serde::{Deserialize, Serialize};

use crate::plant::Activation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64) -> f64 {
    x.next_down()
}

fn up(x: f64) -> f64 {
    x.next_up()
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn radius(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn add(self, other: Interval) -> Interval {
        Interval::new(down(self.lo + other.lo), up(self.hi + other.hi))
    }

    pub fn sub(self, other: Interval) -> Interval {
        Interval::new(down(self.lo - other.hi), up(self.hi - other.lo))
    }

    pub fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }

    pub fn add_scalar(self, c: f64) -> Interval {
        self.add(Interval::point(c))
    }

    pub fn scale(self, c: f64) -> Interval {
        let (a, b) = (self.lo * c, self.hi * c);
        Interval::new(down(a.min(b)), up(a.max(b)))
    }

    pub fn mul(self, other: Interval) -> Interval {
        let products = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ];
        let lo = products.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(down(lo), up(hi))
    }

    pub fn hull(self, other: Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    /// Image under `x -> clamp(x, min, max)`.
    pub fn clamp(self, min: f64, max: f64) -> Interval {
        Interval::new(self.lo.clamp(min, max), self.hi.clamp(min, max))
    }

    /// Image under a monotone non-decreasing `f`, kept inside `[floor, ceil]`.
    fn monotone(self, f: impl Fn(f64) -> f64, floor: f64, ceil: f64) -> Interval {
        Interval::new(
            down(f(self.lo)).clamp(floor, ceil),
            up(f(self.hi)).clamp(floor, ceil),
        )
    }

    pub fn tanh(self) -> Interval {
        self.monotone(f64::tanh, -1.0, 1.0)
    }

    pub fn sigmoid(self) -> Interval {
        self.monotone(sigmoid, 0.0, 1.0)
    }

    pub fn sin(self) -> Interval {
        interval_trig(self, Trig::Sin)
    }

    pub fn cos(self) -> Interval {
        interval_trig(self, Trig::Cos)
    }

    pub fn to_radians(self) -> Interval {
        self.scale(std::f64::consts::PI / 180.0)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Sin,
    Cos,
}

/// Sound enclosure of `sin` or `cos` over an angle interval in radians.
pub fn interval_trig(angle: Interval, f: Trig) -> Interval {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    if !angle.is_finite() || angle.width() >= TAU {
        return Interval::new(-1.0, 1.0);
    }
    let eval = |x: f64| match f {
        Trig::Sin => x.sin(),
        Trig::Cos => x.cos(),
    };
    let (a, b) = (eval(angle.lo), eval(angle.hi));
    let mut lo = down(down(a.min(b)));
    let mut hi = up(up(a.max(b)));
    let (peak, trough) = match f {
        Trig::Sin => (FRAC_PI_2, -FRAC_PI_2),
        Trig::Cos => (0.0, PI),
    };
    // Critical points are widened a hair so rounding in the period reduction
    // cannot hide an extremum sitting on an endpoint.
    let slack = 1e-12 * (1.0 + angle.lo.abs().max(angle.hi.abs()));
    let contains_critical = |c: f64| {
        let k = ((angle.lo - slack - c) / TAU).ceil();
        c + k * TAU <= angle.hi + slack
    };
    if contains_critical(peak) {
        hi = 1.0;
    }
    if contains_critical(trough) {
        lo = -1.0;
    }
    Interval::new(lo.max(-1.0), hi.min(1.0))
}

/// Axis-aligned box over the full plant state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    pub dims: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "interval box bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        let dims = lower
            .iter()
            .zip(upper)
            .map(|(&lo, &hi)| {
                if !(lo.is_finite() && hi.is_finite()) {
                    Err(Error::NonFinite("interval box".into()))
                } else if lo > hi {
                    Err(Error::invalid("interval box", format!("lower {lo} exceeds upper {hi}")))
                } else {
                    Ok(Interval::new(lo, hi))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { dims })
    }

    pub fn from_intervals(dims: Vec<Interval>) -> Self {
        Self { dims }
    }

    pub fn point(x: &[f64]) -> Self {
        Self {
            dims: x.iter().map(|&v| Interval::point(v)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.dims.iter().map(|i| i.lo).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.dims.iter().map(|i| i.hi).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims.len() && self.dims.iter().zip(x).all(|(i, &v)| i.contains(v))
    }

    pub fn max_magnitude(&self) -> f64 {
        self.dims
            .iter()
            .map(|i| i.lo.abs().max(i.hi.abs()))
            .fold(0.0, f64::max)
    }
}

/// Enclosure of `{W x + b : x in input}` for row-major `weights` (rows x cols).
pub fn interval_affine(input: &IntervalBox, weights: &[f64], bias: &[f64]) -> Result<IntervalBox> {
    let cols = input.dim();
    let rows = bias.len();
    if weights.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            context: "interval affine weights",
            expected: rows * cols,
            got: weights.len(),
        });
    }
    let mids: Vec<f64> = input.dims.iter().map(Interval::mid).collect();
    let rads: Vec<f64> = input.dims.iter().map(|i| up(i.radius())).collect();
    // Bound on accumulated rounding error of the two dot products.
    let gamma = (cols as f64 + 3.0) * f64::EPSILON;
    let dims = (0..rows)
        .map(|r| {
            let row = &weights[r * cols..(r + 1) * cols];
            let mut center = bias[r];
            let mut radius = 0.0;
            let mut magnitude = bias[r].abs();
            for ((&w, &m), &rad) in row.iter().zip(&mids).zip(&rads) {
                center += w * m;
                radius += w.abs() * rad;
                magnitude += (w * m).abs();
            }
            let slack = gamma * (magnitude + radius) + f64::MIN_POSITIVE;
            let radius = radius + slack;
            Interval::new(down(center - radius), up(center + radius))
        })
        .collect();
    Ok(IntervalBox { dims })
}

pub fn interval_activation(input: &IntervalBox, activation: Activation) -> IntervalBox {
    let dims = input
        .dims
        .iter()
        .map(|&i| match activation {
            Activation::Tanh => i.tanh(),
            Activation::Sigmoid => i.sigmoid(),
            Activation::Identity => i,
        })
        .collect();
    IntervalBox { dims }
}
