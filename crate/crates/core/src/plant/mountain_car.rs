use super::{Activation, Architecture, Plant};
use crate::interval::{Interval, IntervalBox};

pub const POWER: f64 = 0.0015;
pub const GRAVITY: f64 = 0.0025;
pub const MAX_SPEED: f64 = 0.07;
pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;

/// Continuous mountain car with state `(x, v)` and force in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct MountainCar {
    pub horizon: usize,
}

impl Default for MountainCar {
    fn default() -> Self {
        Self { horizon: 110 }
    }
}

impl MountainCar {
    pub fn architecture() -> Architecture {
        Architecture::new(
            &[2, 16, 16, 1],
            &[Activation::Sigmoid, Activation::Sigmoid, Activation::Tanh],
        )
        .expect("static architecture")
    }
}

pub fn step_mc(state: &[f64], force: f64) -> Vec<f64> {
    let (x, v) = (state[0], state[1]);
    let mut v1 = (v + POWER * force - GRAVITY * (3.0 * x).cos()).clamp(-MAX_SPEED, MAX_SPEED);
    let x1 = (x + v1).clamp(MIN_POSITION, MAX_POSITION);
    if x1 == MIN_POSITION && v1 < 0.0 {
        v1 = 0.0;
    }
    vec![x1, v1]
}

impl Plant for MountainCar {
    fn name(&self) -> &str {
        "mc"
    }

    fn state_names(&self) -> &[&'static str] {
        &["x", "v"]
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn free_coords(&self) -> &[usize] {
        &[0, 1]
    }

    fn initial_state(&self, free: &[f64]) -> Vec<f64> {
        free.to_vec()
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        state.to_vec()
    }

    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-1.0], vec![1.0])
    }

    fn scale_action(&self, raw: &[f64]) -> Vec<f64> {
        vec![raw[0].clamp(-1.0, 1.0)]
    }

    fn step(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        step_mc(state, action[0])
    }

    fn observe_box(&self, state: &IntervalBox) -> IntervalBox {
        state.clone()
    }

    fn scale_action_box(&self, raw: &IntervalBox) -> IntervalBox {
        IntervalBox::from_intervals(vec![raw.dims[0].clamp(-1.0, 1.0)])
    }

    fn step_box(&self, state: &IntervalBox, action: &IntervalBox) -> IntervalBox {
        let (x, v) = (state.dims[0], state.dims[1]);
        let gravity = x.scale(3.0).cos().scale(GRAVITY);
        let v1 = v
            .add(action.dims[0].scale(POWER))
            .sub(gravity)
            .clamp(-MAX_SPEED, MAX_SPEED);
        let x1 = x.add(v1).clamp(MIN_POSITION, MAX_POSITION);
        // States pinned at the left wall with negative velocity have it reset to 0.
        let v1 = if x1.lo <= MIN_POSITION {
            let reset = Interval::new(v1.lo.max(0.0), v1.hi.max(0.0));
            if x1.hi <= MIN_POSITION {
                reset
            } else {
                v1.hull(reset)
            }
        } else {
            v1
        };
        IntervalBox::from_intervals(vec![x1, v1])
    }
}
