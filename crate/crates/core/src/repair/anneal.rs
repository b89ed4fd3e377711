//! Metropolis acceptance and the safeguarded annealing inner loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{evaluate_energy, Energy, EnergyConfig};
use crate::plant::{MlpParams, Plant};
use crate::stl::Formula;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub sigma: f64,
    pub tau0: f64,
    pub alpha: f64,
    pub max_iter: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self { sigma: 0.01, tau0: 1.0, alpha: 0.95, max_iter: 100 }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", format!("must be finite and > 0, got {}", self.sigma)));
        }
        if !(self.tau0 > 0.0) || !self.tau0.is_finite() {
            return Err(Error::invalid("tau0", format!("must be finite and > 0, got {}", self.tau0)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

/// Accepts improvements outright; otherwise accepts with probability
/// `exp(delta / tau)` using a single uniform draw.
pub fn metropolis_accept<R: Rng + ?Sized>(delta: f64, tau: f64, rng: &mut R) -> bool {
    if delta >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u < (delta / tau).exp()
}

/// One annealing iteration as it appears in the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub round: usize,
    pub region: usize,
    pub iter: usize,
    /// Temperature used for this iteration's decision.
    pub tau: f64,
    /// Energy of the current parameters after the decision.
    pub energy: f64,
    pub candidate_energy: f64,
    pub delta: f64,
    pub metropolis: bool,
    pub safeguard_pass: bool,
    /// Verified-region guard result; absent when the guard is off or was not
    /// reached.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub guard_pass: Option<bool>,
    pub accepted: bool,
    /// Minimum protected robustness of the candidate.
    pub rho_min: f64,
}

#[derive(Debug, Clone)]
pub struct AnnealOutcome {
    pub theta: MlpParams,
    pub energy: Energy,
    pub changed: bool,
    pub log: Vec<IterationRecord>,
}

/// Identifies the call in log records.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogTag {
    pub round: usize,
    pub region: usize,
}

/// Extra acceptance test on candidate parameters, run only after the
/// Metropolis test and the safeguard have both passed.
pub type Guard<'a> = &'a (dyn Fn(&MlpParams) -> Result<bool> + Sync);

/// Safeguarded simulated annealing. Every iteration perturbs all parameters
/// with `N(0, sigma^2)` noise and accepts when the Metropolis test passes and,
/// if `safeguard` is on, the candidate keeps every protected sample at
/// robustness `>= 0`. Runs exactly `max_iter` iterations.
#[allow(clippy::too_many_arguments)]
pub fn safeguarded_sim_annealing<R: Rng + ?Sized>(
    plant: &dyn Plant,
    formula: &Formula,
    repair: &[Vec<f64>],
    protected: &[Vec<f64>],
    theta: &MlpParams,
    energy_cfg: &EnergyConfig,
    anneal: &AnnealConfig,
    safeguard: bool,
    guard: Option<Guard<'_>>,
    tag: LogTag,
    rng: &mut R,
) -> Result<AnnealOutcome> {
    if repair.is_empty() {
        return Err(Error::invalid("repair samples", "annealing needs at least one state to repair"));
    }
    let mut current = theta.clone();
    let mut energy = evaluate_energy(plant, formula, repair, protected, &current, energy_cfg)?;
    let mut tau = anneal.tau0;
    let mut log = Vec::with_capacity(anneal.max_iter);
    for iter in 1..=anneal.max_iter {
        let candidate = current.perturbed(anneal.sigma, rng);
        let cand = evaluate_energy(plant, formula, repair, protected, &candidate, energy_cfg)?;
        let delta = cand.value - energy.value;
        let metropolis = metropolis_accept(delta, tau, rng);
        let safeguard_pass = cand.rho_min >= 0.0;
        let mut accepted = metropolis && (safeguard_pass || !safeguard);
        let mut guard_pass = None;
        if let (true, Some(g)) = (accepted, guard) {
            let pass = g(&candidate)?;
            guard_pass = Some(pass);
            accepted = pass;
        }
        if accepted {
            current = candidate;
            energy = cand;
        }
        log.push(IterationRecord {
            round: tag.round,
            region: tag.region,
            iter,
            tau,
            energy: energy.value,
            candidate_energy: cand.value,
            delta,
            metropolis,
            safeguard_pass,
            guard_pass,
            accepted,
            rho_min: cand.rho_min,
        });
        tau *= anneal.alpha;
    }
    let changed = current != *theta;
    Ok(AnnealOutcome { theta: current, energy, changed, log })
}
