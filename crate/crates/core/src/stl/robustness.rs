use super::{Formula, Trajectory};
use crate::{Error, Result};

/// Robustness assigned to `true`; finite so energies stay finite.
pub const DEFAULT_TOP: f64 = 1e9;

#[derive(Clone, Copy)]
enum Aggregation {
    Exact,
    /// Log-sum-exp with the given sharpness.
    Smooth(f64),
}

impl Aggregation {
    fn min(self, values: &mut dyn Iterator<Item = f64>) -> f64 {
        match self {
            Aggregation::Exact => values.fold(f64::INFINITY, f64::min),
            Aggregation::Smooth(beta) => {
                let vals: Vec<f64> = values.collect();
                -log_sum_exp(vals.iter().map(|v| -v), beta)
            }
        }
    }

    fn max(self, values: &mut dyn Iterator<Item = f64>) -> f64 {
        match self {
            Aggregation::Exact => values.fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Smooth(beta) => {
                let vals: Vec<f64> = values.collect();
                log_sum_exp(vals.into_iter(), beta)
            }
        }
    }
}

/// `(1/beta) ln sum exp(beta * v)`, shifted by the maximum for stability.
fn log_sum_exp(values: impl Iterator<Item = f64> + Clone, beta: f64) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = values.map(|v| (beta * (v - m)).exp()).sum();
    m + sum.ln() / beta
}

/// Exact quantitative robustness of `formula` on `traj` at step `t`.
pub fn robustness(formula: &Formula, traj: &Trajectory, t: usize) -> Result<f64> {
    robustness_with_top(formula, traj, t, DEFAULT_TOP)
}

pub fn robustness_with_top(formula: &Formula, traj: &Trajectory, t: usize, top: f64) -> Result<f64> {
    evaluate(formula, traj, t, Aggregation::Exact, top)
}

/// Log-sum-exp surrogate of [`robustness`].
///
/// Every soft min/max runs at sharpness `beta * d`, where `d` is the formula's
/// aggregation depth, so the accumulated error along any nesting chain stays
/// within `ln(n_max) / beta`.
pub fn smooth_robustness(formula: &Formula, traj: &Trajectory, t: usize, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", "must be a positive finite number"));
    }
    let depth = formula.aggregation_depth().max(1) as f64;
    evaluate(formula, traj, t, Aggregation::Smooth(beta * depth), DEFAULT_TOP)
}

fn evaluate(formula: &Formula, traj: &Trajectory, t: usize, agg: Aggregation, top: f64) -> Result<f64> {
    if let Some(max_var) = formula.max_variable() {
        if max_var >= traj.dim() {
            return Err(Error::DimensionMismatch {
                context: "formula variable",
                expected: traj.dim(),
                got: max_var + 1,
            });
        }
    }
    let needed = formula.horizon();
    let last = traj.len() - 1;
    if t > last || needed > last - t {
        return Err(Error::HorizonTooShort {
            start: t,
            needed,
            available: last.saturating_sub(t),
        });
    }
    let sig = signal(formula, traj, t, agg, top);
    Ok(sig[0])
}

/// Robustness at times `from, from+1, .., len-1-horizon(f)`.
fn signal(f: &Formula, traj: &Trajectory, from: usize, agg: Aggregation, top: f64) -> Vec<f64> {
    let n = traj.len() - f.horizon() - from;
    match f {
        Formula::True => vec![top; n],
        Formula::Predicate(p) => (from..from + n).map(|t| p.margin(traj.state(t))).collect(),
        Formula::Not(g) => signal(g, traj, from, agg, top).into_iter().map(|v| -v).collect(),
        Formula::And(a, b) | Formula::Or(a, b) => {
            let sa = signal(a, traj, from, agg, top);
            let sb = signal(b, traj, from, agg, top);
            let is_and = matches!(f, Formula::And(..));
            (0..n)
                .map(|i| {
                    let mut pair = [sa[i], sb[i]].into_iter();
                    if is_and {
                        agg.min(&mut pair)
                    } else {
                        agg.max(&mut pair)
                    }
                })
                .collect()
        }
        Formula::Globally(w, g) | Formula::Finally(w, g) => {
            let sg = signal(g, traj, from, agg, top);
            let is_globally = matches!(f, Formula::Globally(..));
            (0..n)
                .map(|i| {
                    let mut window = sg[i + w.start..=i + w.end].iter().copied();
                    if is_globally {
                        agg.min(&mut window)
                    } else {
                        agg.max(&mut window)
                    }
                })
                .collect()
        }
        Formula::Until(w, lhs, rhs) => {
            let sl = signal(lhs, traj, from, agg, top);
            let sr = signal(rhs, traj, from, agg, top);
            (0..n)
                .map(|i| {
                    let mut candidates = (i + w.start..=i + w.end).map(|k| {
                        let mut guard = std::iter::once(sr[k]).chain(sl[i..k].iter().copied());
                        agg.min(&mut guard)
                    });
                    agg.max(&mut candidates)
                })
                .collect()
        }
    }
}
