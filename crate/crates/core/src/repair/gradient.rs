//! Gradient ascent on the smoothed energy, used by the gradient baseline.

use serde::{Deserialize, Serialize};

use crate::energy::{evaluate_energy, evaluate_smooth_energy, smooth_energy_grad, EnergyConfig};
use crate::plant::{rob_many, MlpParams, Plant};
use crate::stl::Formula;
use crate::{Error, Result};

/// How the energy gradient is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Backpropagation through the closed loop.
    Adjoint,
    /// Central differences per parameter; two energy evaluations each.
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientConfig {
    pub mode: GradientMode,
    pub etas: Vec<f64>,
    /// Ascent steps per step size and round.
    pub steps: usize,
    /// Central-difference step per parameter in finite-difference mode.
    pub fd_step: f64,
    /// Sharpness of the smoothed robustness.
    pub beta: f64,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            mode: GradientMode::Adjoint,
            etas: vec![0.01, 0.001, 0.0001],
            steps: 10,
            fd_step: 1e-4,
            beta: 10.0,
        }
    }
}

impl GradientConfig {
    pub fn validate(&self) -> Result<()> {
        if self.etas.is_empty() || self.etas.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::invalid("etas", "need at least one finite, non-negative step size"));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::invalid("fd_step", format!("must be > 0, got {}", self.fd_step)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta", format!("must be > 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_difference_gradient<F>(f: &F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe)?;
        probe[i] = x[i] - h;
        let minus = f(&probe)?;
        probe[i] = x[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentPath {
    pub x: Vec<f64>,
    pub accepted_steps: usize,
}

/// Up to `steps` moves `x <- x + eta * grad(x)`; stops at the first move
/// `accept` rejects. `first` is the gradient at `x0` when already known.
pub fn gradient_ascent<G, A>(
    grad: &G,
    accept: &A,
    x0: &[f64],
    eta: f64,
    steps: usize,
    first: Option<&[f64]>,
) -> Result<AscentPath>
where
    G: Fn(&[f64]) -> Result<Vec<f64>>,
    A: Fn(&[f64]) -> Result<bool>,
{
    let mut x = x0.to_vec();
    let mut accepted_steps = 0;
    if eta == 0.0 {
        return Ok(AscentPath { x, accepted_steps });
    }
    for step in 0..steps {
        let g = match (step, first) {
            (0, Some(g)) => g.to_vec(),
            _ => grad(&x)?,
        };
        let cand: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + eta * gi).collect();
        if !accept(&cand)? {
            break;
        }
        x = cand;
        accepted_steps += 1;
    }
    Ok(AscentPath { x, accepted_steps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientRecord {
    pub round: usize,
    pub region: usize,
    pub eta: f64,
    pub accepted_steps: usize,
    pub energy: f64,
    pub rho_min: f64,
    pub chosen: bool,
}

pub struct GradientOutcome {
    pub theta: MlpParams,
    pub changed: bool,
    pub log: Vec<GradientRecord>,
}

/// One repair round of the gradient baseline: ascend the smoothed energy for
/// each step size, reject moves that push a protected sample below zero, and
/// keep the candidate with the highest exact energy.
#[allow(clippy::too_many_arguments)]
pub fn gradient_round(
    plant: &dyn Plant,
    formula: &Formula,
    repair: &[Vec<f64>],
    protected: &[Vec<f64>],
    theta: &MlpParams,
    energy_cfg: &EnergyConfig,
    cfg: &GradientConfig,
    round: usize,
    region: usize,
) -> Result<GradientOutcome> {
    let grad = |flat: &[f64]| -> Result<Vec<f64>> {
        let t = theta.with_flat(flat)?;
        match cfg.mode {
            GradientMode::Adjoint => {
                smooth_energy_grad(plant, formula, repair, protected, &t, energy_cfg, cfg.beta).map(|(_, g)| g)
            }
            GradientMode::FiniteDifference => {
                let smooth = |f: &[f64]| -> Result<f64> {
                    let t = theta.with_flat(f)?;
                    evaluate_smooth_energy(plant, formula, repair, protected, &t, energy_cfg, cfg.beta)
                };
                finite_difference_gradient(&smooth, flat, cfg.fd_step)
            }
        }
    };
    let safe = |flat: &[f64]| -> Result<bool> {
        let t = theta.with_flat(flat)?;
        Ok(rob_many(plant, formula, protected, &t)?.iter().all(|&r| r >= 0.0))
    };
    let start = evaluate_energy(plant, formula, repair, protected, theta, energy_cfg)?;
    let mut best = (theta.clone(), start.value);
    let mut log = Vec::with_capacity(cfg.etas.len());
    let mut chosen = None;
    let x0 = theta.to_flat();
    // Every step size starts from the same point, so the first gradient is shared.
    let g0 = if cfg.steps > 0 && cfg.etas.iter().any(|&e| e != 0.0) { Some(grad(&x0)?) } else { None };
    for &eta in &cfg.etas {
        let path = gradient_ascent(&grad, &safe, &x0, eta, cfg.steps, g0.as_deref())?;
        let cand = theta.with_flat(&path.x)?;
        let e = evaluate_energy(plant, formula, repair, protected, &cand, energy_cfg)?;
        if path.accepted_steps > 0 && e.value > best.1 {
            best = (cand, e.value);
            chosen = Some(log.len());
        }
        log.push(GradientRecord {
            round,
            region,
            eta,
            accepted_steps: path.accepted_steps,
            energy: e.value,
            rho_min: e.rho_min,
            chosen: false,
        });
    }
    if let Some(i) = chosen {
        log[i].chosen = true;
    }
    let changed = best.0 != *theta;
    Ok(GradientOutcome { theta: best.0, changed, log })
}
