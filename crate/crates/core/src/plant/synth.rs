//! Scripted synthesis of deliberately imperfect seed controllers.
//!
//! Starts from a poor controller (zero, or the worst of a few random draws),
//! then hill-climbs mean robustness over a coarse grid of initial states and
//! stops as soon as the controller succeeds on a target fraction of the grid
//! while still failing somewhere.

use super::{rob_many, Architecture, MlpParams, Plant};
use crate::rng::{stream, Purpose};
use crate::stl::Formula;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisInit {
    Zero,
    Random,
}

#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    /// Number of candidate perturbations to try.
    pub budget: usize,
    pub seed: u64,
    pub init: SynthesisInit,
    /// Grid points per free coordinate.
    pub grid_points: usize,
    pub sigma: f64,
    /// Random networks drawn before climbing; the worst one is the start.
    pub restarts: usize,
    /// Stop once this fraction of grid states succeeds (while some still fail).
    pub target_success: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            budget: 200,
            seed: 0,
            init: SynthesisInit::Random,
            grid_points: 6,
            sigma: 0.05,
            restarts: 8,
            target_success: 0.6,
        }
    }
}

struct Score {
    mean: f64,
    success: f64,
}

impl Score {
    fn mixed(&self) -> bool {
        self.success > 0.0 && self.success < 1.0
    }
}

fn grid_states(plant: &dyn Plant, lower: &[f64], upper: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for (&lo, &hi) in lower.iter().zip(upper) {
        let coords: Vec<f64> = (0..n)
            .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / n as f64)
            .collect();
        points = points
            .into_iter()
            .flat_map(|p| {
                coords.iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    points.iter().map(|p| plant.initial_state(p)).collect()
}

pub fn synthesize_seed_controller(
    plant: &dyn Plant,
    formula: &Formula,
    arch: &Architecture,
    lower: &[f64],
    upper: &[f64],
    opts: &SynthesisOptions,
) -> Result<MlpParams> {
    if opts.budget == 0 {
        return Err(Error::invalid("synthesis", "budget must be at least 1"));
    }
    if opts.grid_points == 0 || !(opts.sigma >= 0.0) {
        return Err(Error::invalid("synthesis", "grid_points must be positive and sigma non-negative"));
    }
    let states = grid_states(plant, lower, upper, opts.grid_points);
    let evaluate = |theta: &MlpParams| -> Result<Score> {
        let robs = rob_many(plant, formula, &states, theta)?;
        let n = robs.len() as f64;
        Ok(Score {
            mean: robs.iter().sum::<f64>() / n,
            success: robs.iter().filter(|&&r| r >= 0.0).count() as f64 / n,
        })
    };
    let done = |s: &Score| s.mixed() && s.success >= opts.target_success;

    let mut rng = stream(opts.seed, Purpose::Synthesis, 0);
    let (mut theta, mut score) = match opts.init {
        SynthesisInit::Zero => {
            let t = MlpParams::zeros(arch);
            let s = evaluate(&t)?;
            (t, s)
        }
        SynthesisInit::Random => {
            let mut worst: Option<(MlpParams, Score)> = None;
            for _ in 0..opts.restarts.max(1) {
                let t = MlpParams::random(arch, &mut rng);
                let s = evaluate(&t)?;
                let worse = worst
                    .as_ref()
                    .is_none_or(|(_, w)| (s.success, s.mean) < (w.success, w.mean));
                if worse {
                    worst = Some((t, s));
                }
            }
            worst.expect("at least one draw")
        }
    };
    if done(&score) {
        return Ok(theta);
    }
    let mut best_mixed = score.mixed().then(|| (theta.clone(), score.mean));

    for _ in 0..opts.budget {
        let candidate = theta.perturbed(opts.sigma, &mut rng);
        let cand_score = evaluate(&candidate)?;
        if done(&cand_score) {
            return Ok(candidate);
        }
        if cand_score.mixed() && best_mixed.as_ref().is_none_or(|(_, m)| cand_score.mean > *m) {
            best_mixed = Some((candidate.clone(), cand_score.mean));
        }
        if cand_score.mean >= score.mean {
            theta = candidate;
            score = cand_score;
        }
    }
    best_mixed.map(|(t, _)| t).ok_or_else(|| {
        Error::Synthesis(format!(
            "no controller with both succeeding and failing grid states after {} candidates (success fraction {:.3})",
            opts.budget, score.success
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{MountainCar, Uuv};
    use crate::stl::parse_formula;

    #[test]
    fn zero_budget_is_rejected() {
        let plant = MountainCar::default();
        let phi = parse_formula("F[0,110](x >= 0.45)", &plant.signature()).unwrap();
        let opts = SynthesisOptions {
            budget: 0,
            init: SynthesisInit::Zero,
            ..Default::default()
        };
        let err = synthesize_seed_controller(
            &plant,
            &phi,
            &MountainCar::architecture(),
            &[-0.505, -0.055],
            &[0.395, 0.045],
            &opts,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "invalid_value");
    }

    #[test]
    fn synthesis_is_deterministic_and_mixed() {
        let plant = Uuv::default();
        let phi = parse_formula("G[0,30](y > 10 & y < 50)", &plant.signature()).unwrap();
        let opts = SynthesisOptions {
            seed: 7,
            ..Default::default()
        };
        let run = || {
            synthesize_seed_controller(&plant, &phi, &Uuv::architecture(), &[12.0, 10.0], &[22.0, 30.0], &opts)
                .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let states = grid_states(&plant, &[12.0, 10.0], &[22.0, 30.0], opts.grid_points);
        let robs = rob_many(&plant, &phi, &states, &a).unwrap();
        assert!(robs.iter().any(|&r| r >= 0.0) && robs.iter().any(|&r| r < 0.0));
    }
}
