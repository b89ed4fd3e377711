use std::f64::consts::PI;

use super::{Activation, Architecture, Plant};
use crate::interval::{Interval, IntervalBox};

/// Pipe-following underwater vehicle: unicycle kinematics at fixed speed.
///
/// State `(x, y, h, v)` with heading `h` in degrees. The controller sees the
/// heading and the distance `y - 10` to the pipe's lower edge, and its output
/// in `[-1, 1]` maps to a heading change of at most `max_turn` degrees per step.
#[derive(Debug, Clone)]
pub struct Uuv {
    pub speed: f64,
    pub max_turn: f64,
    pub lower_edge: f64,
    pub horizon: usize,
}

impl Default for Uuv {
    fn default() -> Self {
        Self {
            speed: 0.4855,
            max_turn: 5.0,
            lower_edge: 10.0,
            horizon: 30,
        }
    }
}

impl Uuv {
    pub fn architecture() -> Architecture {
        Architecture::new(&[2, 32, 32, 1], &[Activation::Tanh; 3]).expect("static architecture")
    }
}

/// One unicycle step with `dt = 1 s`.
pub fn step_uuv(state: &[f64], turn: f64) -> Vec<f64> {
    let (x, y, h, v) = (state[0], state[1], state[2], state[3]);
    let rad = h * (PI / 180.0);
    vec![x + v * rad.cos(), y + v * rad.sin(), h + turn, v]
}

impl Plant for Uuv {
    fn name(&self) -> &str {
        "uuv"
    }

    fn state_names(&self) -> &[&'static str] {
        &["x", "y", "h", "v"]
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
        &[1, 2]
    }

    fn initial_state(&self, free: &[f64]) -> Vec<f64> {
        vec![0.0, free[0], free[1], self.speed]
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        vec![state[2], state[1] - self.lower_edge]
    }

    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-self.max_turn], vec![self.max_turn])
    }

    fn scale_action(&self, raw: &[f64]) -> Vec<f64> {
        vec![raw[0].clamp(-1.0, 1.0) * self.max_turn]
    }

    fn step(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        step_uuv(state, action[0])
    }

    fn observe_box(&self, state: &IntervalBox) -> IntervalBox {
        IntervalBox::from_intervals(vec![state.dims[2], state.dims[1].add_scalar(-self.lower_edge)])
    }

    fn scale_action_box(&self, raw: &IntervalBox) -> IntervalBox {
        IntervalBox::from_intervals(vec![raw.dims[0].clamp(-1.0, 1.0).scale(self.max_turn)])
    }

    fn step_box(&self, state: &IntervalBox, action: &IntervalBox) -> IntervalBox {
        let [x, y, h, v]: [Interval; 4] = state.dims[..4].try_into().expect("uuv state is 4-d");
        let rad = h.to_radians();
        IntervalBox::from_intervals(vec![
            x.add(v.mul(rad.cos())),
            y.add(v.mul(rad.sin())),
            h.add(action.dims[0]),
            v,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_along_pipe() {
        let s = step_uuv(&[0.0, 12.0, 0.0, 0.4855], 0.0);
        assert_eq!(s, vec![0.4855, 12.0, 0.0, 0.4855]);
    }

    #[test]
    fn heading_ninety() {
        let s = step_uuv(&[0.0, 12.0, 90.0, 0.4855], 0.0);
        assert!(s[0].abs() < 1e-12);
        assert!((s[1] - 12.4855).abs() < 1e-12);
        assert_eq!((s[2], s[3]), (90.0, 0.4855));
    }

    #[test]
    fn turning_uses_pre_turn_heading() {
        let s = step_uuv(&[0.0, 20.0, 10.0, 0.4855], -10.0);
        assert_eq!(s[2], 0.0);
        assert!((s[1] - 20.084307).abs() < 1e-6);
        assert!((s[1] - (20.0 + 0.4855 * 10f64.to_radians().sin())).abs() < 1e-12);
    }

    #[test]
    fn action_scaling_clamps() {
        let plant = Uuv::default();
        assert_eq!(plant.scale_action(&[3.0]), vec![5.0]);
        assert_eq!(plant.scale_action(&[-0.5]), vec![-2.5]);
    }
}
