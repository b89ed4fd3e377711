//! Closed-loop plant models and the robustness subroutine.

mod adjoint;
mod mlp;
mod mountain_car;
mod synth;
mod toy;
mod uuv;

use rayon::prelude::*;

use crate::interval::IntervalBox;
use crate::stl::{robustness, Formula, Signature, Trajectory};
use crate::{Error, Result};

pub use adjoint::smooth_rob_grad;
pub use mlp::{Activation, Architecture, Layer, MlpParams, WEIGHTS_FORMAT, WEIGHTS_VERSION};
pub use mountain_car::MountainCar;
pub use synth::{synthesize_seed_controller, SynthesisInit, SynthesisOptions};
pub use toy::{Integrator, StaticPlant};
pub use uuv::Uuv;

/// Deterministic discrete-time dynamics `s' = f(s, a)` with fixed observation map.
///
/// The `*_box` methods must return sound enclosures of their point
/// counterparts; the verifier relies on them.
pub trait Plant: Send + Sync {
    fn name(&self) -> &str;

    fn state_names(&self) -> &[&'static str];

    fn state_dim(&self) -> usize {
        self.state_names().len()
    }

    fn signature(&self) -> Signature {
        Signature::new(self.state_names())
    }

    fn obs_dim(&self) -> usize;

    fn action_dim(&self) -> usize;

    /// Rollout length `T`; trajectories hold `T + 1` states.
    fn horizon(&self) -> usize;

    fn dt(&self) -> f64 {
        1.0
    }

    /// State coordinates spanned by the initial set, in region order.
    fn free_coords(&self) -> &[usize];

    /// Full initial state from values of the free coordinates.
    fn initial_state(&self, free: &[f64]) -> Vec<f64>;

    fn observe(&self, state: &[f64]) -> Vec<f64>;

    /// Declared action box after scaling, `(lower, upper)`.
    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>);

    /// Maps raw network output into the action box.
    fn scale_action(&self, raw: &[f64]) -> Vec<f64>;

    fn step(&self, state: &[f64], action: &[f64]) -> Vec<f64>;

    fn observe_box(&self, state: &IntervalBox) -> IntervalBox;

    fn scale_action_box(&self, raw: &IntervalBox) -> IntervalBox;

    fn step_box(&self, state: &IntervalBox, action: &IntervalBox) -> IntervalBox;

    /// Box of full initial states for a box over the free coordinates.
    fn initial_box(&self, lower: &[f64], upper: &[f64]) -> IntervalBox {
        let a = self.initial_state(lower);
        let b = self.initial_state(upper);
        let lo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
        let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
        IntervalBox::new(&lo, &hi).expect("initial box from finite states")
    }
}

pub fn plant_by_name(name: &str) -> Result<Box<dyn Plant>> {
    match name {
        "uuv" => Ok(Box::new(Uuv::default())),
        "mc" => Ok(Box::new(MountainCar::default())),
        "integrator" => Ok(Box::new(Integrator::default())),
        other => Err(Error::UnknownPlant(other.to_string())),
    }
}

fn check_controller(plant: &dyn Plant, theta: &MlpParams) -> Result<()> {
    if theta.input_dim() != plant.obs_dim() {
        return Err(Error::DimensionMismatch {
            context: "controller input vs plant observation",
            expected: plant.obs_dim(),
            got: theta.input_dim(),
        });
    }
    if theta.output_dim() != plant.action_dim() {
        return Err(Error::DimensionMismatch {
            context: "controller output vs plant action",
            expected: plant.action_dim(),
            got: theta.output_dim(),
        });
    }
    Ok(())
}

/// Network output for `obs`, scaled into the plant's action box.
pub fn controller_eval(plant: &dyn Plant, theta: &MlpParams, obs: &[f64]) -> Result<Vec<f64>> {
    let raw = theta.forward(obs)?;
    Ok(plant.scale_action(&raw))
}

/// Closed-loop simulation returning states and the applied actions.
pub fn rollout_with_actions(
    plant: &dyn Plant,
    theta: &MlpParams,
    s0: &[f64],
    steps: usize,
) -> Result<(Trajectory, Vec<Vec<f64>>)> {
    check_controller(plant, theta)?;
    if s0.len() != plant.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: plant.state_dim(),
            got: s0.len(),
        });
    }
    if s0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state".into()));
    }
    let mut data = Vec::with_capacity(s0.len() * (steps + 1));
    let mut actions = Vec::with_capacity(steps);
    data.extend_from_slice(s0);
    let mut state = s0.to_vec();
    for _ in 0..steps {
        let action = controller_eval(plant, theta, &plant.observe(&state))?;
        state = plant.step(&state, &action);
        data.extend_from_slice(&state);
        actions.push(action);
    }
    let traj = Trajectory::from_flat(plant.state_dim(), data, plant.dt())?;
    Ok((traj, actions))
}

pub fn rollout(plant: &dyn Plant, theta: &MlpParams, s0: &[f64], steps: usize) -> Result<Trajectory> {
    rollout_with_actions(plant, theta, s0, steps).map(|(traj, _)| traj)
}

/// Robustness of `formula` on the closed-loop trajectory from `s0`.
pub fn rob(plant: &dyn Plant, formula: &Formula, s0: &[f64], theta: &MlpParams) -> Result<f64> {
    let steps = plant.horizon();
    if formula.horizon() > steps {
        return Err(Error::HorizonTooShort {
            start: 0,
            needed: formula.horizon(),
            available: steps,
        });
    }
    let traj = rollout(plant, theta, s0, steps)?;
    robustness(formula, &traj, 0)
}

/// [`rob`] for many initial states; results are in input order.
pub fn rob_many(
    plant: &dyn Plant,
    formula: &Formula,
    states: &[Vec<f64>],
    theta: &MlpParams,
) -> Result<Vec<f64>> {
    states
        .par_iter()
        .map(|s| rob(plant, formula, s, theta))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::stl::parse_formula;
    use rand::Rng;

    fn uuv_zero() -> MlpParams {
        MlpParams::zeros(&Uuv::architecture())
    }

    #[test]
    fn zero_controller_uuv_drives_straight() {
        let plant = Uuv::default();
        let traj = rollout(&plant, &uuv_zero(), &plant.initial_state(&[12.0, 0.0]), 3).unwrap();
        assert_eq!(traj.len(), 4);
        for (t, s) in traj.states().enumerate() {
            assert!((s[0] - 0.4855 * t as f64).abs() < 1e-12);
            assert_eq!(s[1], 12.0);
            assert_eq!(s[2], 0.0);
        }
    }

    #[test]
    fn single_step_rollout() {
        let plant = MountainCar::default();
        let theta = MlpParams::zeros(&MountainCar::architecture());
        assert_eq!(rollout(&plant, &theta, &[-0.5, 0.0], 1).unwrap().len(), 2);
    }

    #[test]
    fn unactuated_car_cannot_climb() {
        let plant = MountainCar::default();
        let theta = MlpParams::zeros(&MountainCar::architecture());
        let phi = parse_formula("F[0,110](x >= 0.45)", &plant.signature()).unwrap();
        let r = rob(&plant, &phi, &[-0.5, 0.0], &theta).unwrap();
        assert!(r < 0.0);
    }

    #[test]
    fn uuv_level_trajectory_robustness() {
        // Heading 0 keeps y fixed at 30: margin min(30 - 10, 50 - 30) every step.
        let plant = Uuv::default();
        let phi = parse_formula("G[0,30](y > 10 & y < 50)", &plant.signature()).unwrap();
        let r = rob(&plant, &phi, &plant.initial_state(&[30.0, 0.0]), &uuv_zero()).unwrap();
        assert_eq!(r, 20.0);
    }

    #[test]
    fn tautology_gives_top() {
        let plant = Uuv::default();
        let r = rob(&plant, &Formula::True, &plant.initial_state(&[15.0, 20.0]), &uuv_zero()).unwrap();
        assert_eq!(r, crate::stl::DEFAULT_TOP);
    }

    #[test]
    fn rob_rejects_long_formula() {
        let plant = Uuv::default();
        let phi = parse_formula("G[0,31](y > 10)", &plant.signature()).unwrap();
        let err = rob(&plant, &phi, &plant.initial_state(&[15.0, 20.0]), &uuv_zero()).unwrap_err();
        assert!(matches!(err, Error::HorizonTooShort { .. }));
    }

    #[test]
    fn controller_dimension_mismatch() {
        let plant = Uuv::default();
        let theta = MlpParams::zeros(&Architecture::new(&[3, 1], &[Activation::Tanh]).unwrap());
        assert!(rollout(&plant, &theta, &plant.initial_state(&[15.0, 20.0]), 2).is_err());
    }

    #[test]
    fn rollouts_are_deterministic_and_clamped() {
        let mut rng = stream(11, Purpose::Synthesis, 0);
        for plant in [Box::new(Uuv::default()) as Box<dyn Plant>, Box::new(MountainCar::default())] {
            let arch = if plant.name() == "uuv" { Uuv::architecture() } else { MountainCar::architecture() };
            for _ in 0..20 {
                let theta = MlpParams::random(&arch, &mut rng).perturbed(1.0, &mut rng);
                let free: Vec<f64> = if plant.name() == "uuv" {
                    vec![rng.random_range(12.0..22.0), rng.random_range(10.0..30.0)]
                } else {
                    vec![rng.random_range(-0.505..0.395), rng.random_range(-0.055..0.045)]
                };
                let s0 = plant.initial_state(&free);
                let (a, acts) = rollout_with_actions(plant.as_ref(), &theta, &s0, plant.horizon()).unwrap();
                let b = rollout(plant.as_ref(), &theta, &s0, plant.horizon()).unwrap();
                assert_eq!(a, b);
                let (lo, hi) = plant.action_bounds();
                for act in &acts {
                    assert!(act.iter().zip(lo.iter().zip(&hi)).all(|(v, (l, h))| l <= v && v <= h));
                }
                if plant.name() == "mc" {
                    for s in a.states() {
                        assert!((-1.2..=0.6).contains(&s[0]) && s[1].abs() <= 0.07);
                    }
                }
            }
        }
    }

    #[test]
    fn mountain_car_ceiling() {
        let plant = MountainCar::default();
        let phi = parse_formula("F[0,110](x >= 0.45)", &plant.signature()).unwrap();
        let mut rng = stream(5, Purpose::Synthesis, 0);
        for _ in 0..50 {
            let theta = MlpParams::random(&MountainCar::architecture(), &mut rng).perturbed(2.0, &mut rng);
            let s0 = [rng.random_range(-0.505..0.395), rng.random_range(-0.055..0.045)];
            assert!(rob(&plant, &phi, &s0, &theta).unwrap() <= 0.15 + 1e-12);
        }
    }
}
