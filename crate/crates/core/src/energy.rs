//! Monte Carlo energy with a log barrier over the protected samples.
//!
//! `e = mean rob(repair samples) + lambda * mean log_barrier(rob(protected))`

use rayon::prelude::*;

use crate::plant::{rob_many, rollout, smooth_rob_grad, MlpParams, Plant};
use crate::region::Region;
use crate::stl::{smooth_robustness, Formula, DEFAULT_TOP};
use crate::{Error, Result};

pub const DEFAULT_BARRIER_FLOOR: f64 = -1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConfig {
    pub lambda: f64,
    pub barrier_floor: f64,
    /// Samples per region.
    pub k: usize,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self { lambda: 1.0, barrier_floor: DEFAULT_BARRIER_FLOOR, k: 100 }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.barrier_floor < 0.0) || !self.barrier_floor.is_finite() {
            return Err(Error::invalid(
                "barrier_floor",
                format!("must be finite and negative, got {}", self.barrier_floor),
            ));
        }
        if self.k == 0 {
            return Err(Error::invalid("K", "must be at least 1"));
        }
        Ok(())
    }
}

/// `max(floor, ln rho)` for positive `rho`, `floor` otherwise.
pub fn log_barrier(rho: f64, floor: f64) -> f64 {
    if rho > 0.0 {
        rho.ln().max(floor)
    } else {
        floor
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub value: f64,
    /// Minimum protected robustness; [`DEFAULT_TOP`] when nothing is protected.
    pub rho_min: f64,
}

/// Energy from precomputed robustness values. Sums run in index order so the
/// result does not depend on how the values were computed.
pub fn energy_from_robustness(repair: &[f64], protected: &[f64], cfg: &EnergyConfig) -> Result<Energy> {
    if repair.is_empty() {
        return Err(Error::invalid("repair samples", "at least one state to repair is required"));
    }
    let mean = repair.iter().sum::<f64>() / repair.len() as f64;
    if protected.is_empty() {
        return Ok(Energy { value: mean, rho_min: DEFAULT_TOP });
    }
    let barrier = protected.iter().map(|&r| log_barrier(r, cfg.barrier_floor)).sum::<f64>()
        / protected.len() as f64;
    let rho_min = protected.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Energy { value: mean + cfg.lambda * barrier, rho_min })
}

pub fn evaluate_energy(
    plant: &dyn Plant,
    formula: &Formula,
    repair: &[Vec<f64>],
    protected: &[Vec<f64>],
    theta: &MlpParams,
    cfg: &EnergyConfig,
) -> Result<Energy> {
    if repair.is_empty() {
        return Err(Error::invalid("repair samples", "at least one state to repair is required"));
    }
    let r = rob_many(plant, formula, repair, theta)?;
    let p = rob_many(plant, formula, protected, theta)?;
    energy_from_robustness(&r, &p, cfg)
}

/// Smoothed robustness for many initial states, in input order.
pub fn smooth_rob_many(
    plant: &dyn Plant,
    formula: &Formula,
    states: &[Vec<f64>],
    theta: &MlpParams,
    beta: f64,
) -> Result<Vec<f64>> {
    states
        .par_iter()
        .map(|s| {
            let traj = rollout(plant, theta, s, plant.horizon())?;
            smooth_robustness(formula, &traj, 0, beta)
        })
        .collect()
}

/// Energy with smoothed robustness everywhere; used by the gradient baseline.
pub fn evaluate_smooth_energy(
    plant: &dyn Plant,
    formula: &Formula,
    repair: &[Vec<f64>],
    protected: &[Vec<f64>],
    theta: &MlpParams,
    cfg: &EnergyConfig,
    beta: f64,
) -> Result<f64> {
    let r = smooth_rob_many(plant, formula, repair, theta, beta)?;
    let p = smooth_rob_many(plant, formula, protected, theta, beta)?;
    energy_from_robustness(&r, &p, cfg).map(|e| e.value)
}

/// [`evaluate_smooth_energy`] together with its gradient over `theta.to_flat()`.
pub fn smooth_energy_grad(
    plant: &dyn Plant,
    formula: &Formula,
    repair: &[Vec<f64>],
    protected: &[Vec<f64>],
    theta: &MlpParams,
    cfg: &EnergyConfig,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    if repair.is_empty() {
        return Err(Error::invalid("repair samples", "at least one state to repair is required"));
    }
    let per_state = |states: &[Vec<f64>]| -> Result<Vec<(f64, Vec<f64>)>> {
        states.par_iter().map(|s| smooth_rob_grad(plant, formula, s, theta, beta)).collect()
    };
    let r = per_state(repair)?;
    let p = per_state(protected)?;
    let rv: Vec<f64> = r.iter().map(|(v, _)| *v).collect();
    let pv: Vec<f64> = p.iter().map(|(v, _)| *v).collect();
    let value = energy_from_robustness(&rv, &pv, cfg)?.value;

    let mut grad = vec![0.0; theta.num_params()];
    let wr = 1.0 / r.len() as f64;
    for (_, g) in &r {
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += wr * b);
    }
    for (v, g) in &p {
        // d/drho max(floor, ln rho) is 1/rho above the floor and 0 below it.
        let slope = if *v > 0.0 && v.ln() > cfg.barrier_floor { 1.0 / v } else { 0.0 };
        let w = cfg.lambda * slope / p.len() as f64;
        if w != 0.0 {
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += w * b);
        }
    }
    Ok((value, grad))
}

/// Midpoints of a `density^d` grid over the region.
fn midpoint_grid(region: &Region, density: usize) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for (&l, &u) in region.lower.iter().zip(&region.upper) {
        let h = (u - l) / density as f64;
        points = points
            .into_iter()
            .flat_map(|p| {
                (0..density).map(move |k| {
                    let mut q = p.clone();
                    q.push(l + h * (k as f64 + 0.5));
                    q
                })
            })
            .collect();
    }
    points
}

/// Deterministic quadrature of the integral energy: the mean robustness over
/// `region` plus `lambda` times the volume-averaged log barrier over the
/// protected regions.
pub fn exact_energy_oracle(
    plant: &dyn Plant,
    formula: &Formula,
    region: &Region,
    protected: &[Region],
    theta: &MlpParams,
    cfg: &EnergyConfig,
    density: usize,
) -> Result<f64> {
    if density < 50 {
        return Err(Error::invalid("density", format!("need at least 50 points per dimension, got {density}")));
    }
    let full = |free: &[f64]| plant.initial_state(free);
    let mean_rob = |r: &Region| -> Result<Vec<f64>> {
        let states: Vec<Vec<f64>> = midpoint_grid(r, density).iter().map(|p| full(p)).collect();
        rob_many(plant, formula, &states, theta)
    };
    let main = mean_rob(region)?;
    let mut value = main.iter().sum::<f64>() / main.len() as f64;
    if !protected.is_empty() {
        let (mut weighted, mut volume) = (0.0, 0.0);
        for r in protected {
            let robs = mean_rob(r)?;
            let barrier = robs.iter().map(|&x| log_barrier(x, cfg.barrier_floor)).sum::<f64>() / robs.len() as f64;
            weighted += r.volume() * barrier;
            volume += r.volume();
        }
        value += cfg.lambda * weighted / volume;
    }
    Ok(value)
}
