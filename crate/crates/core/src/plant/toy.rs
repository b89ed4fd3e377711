//! Small synthetic plants with closed-form behavior, used by tests and demos.

use super::{Activation, Architecture, Plant};
use crate::interval::IntervalBox;

/// Scalar integrator `x' = x + a` with `a` in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub horizon: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { horizon: 1 }
    }
}

impl Integrator {
    /// A single identity unit: `a = w x + b`.
    pub fn architecture() -> Architecture {
        Architecture::new(&[1, 1], &[Activation::Identity]).expect("static architecture")
    }
}

impl Plant for Integrator {
    fn name(&self) -> &str {
        "integrator"
    }

    fn state_names(&self) -> &[&'static str] {
        &["x"]
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn free_coords(&self) -> &[usize] {
        &[0]
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
        vec![state[0] + action[0]]
    }

    fn observe_box(&self, state: &IntervalBox) -> IntervalBox {
        state.clone()
    }

    fn scale_action_box(&self, raw: &IntervalBox) -> IntervalBox {
        IntervalBox::from_intervals(vec![raw.dims[0].clamp(-1.0, 1.0)])
    }

    fn step_box(&self, state: &IntervalBox, action: &IntervalBox) -> IntervalBox {
        IntervalBox::from_intervals(vec![state.dims[0].add(action.dims[0])])
    }
}

/// Plant whose state never moves; robustness of a state predicate is then an
/// analytic function of the initial state.
#[derive(Debug, Clone)]
pub struct StaticPlant {
    names: Vec<&'static str>,
    free: Vec<usize>,
}

impl StaticPlant {
    pub fn new(names: &[&'static str]) -> Self {
        Self {
            names: names.to_vec(),
            free: (0..names.len()).collect(),
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture::new(&[self.names.len(), 1], &[Activation::Identity]).expect("static architecture")
    }
}

impl Plant for StaticPlant {
    fn name(&self) -> &str {
        "static"
    }

    fn state_names(&self) -> &[&'static str] {
        &self.names
    }

    fn obs_dim(&self) -> usize {
        self.names.len()
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        1
    }

    fn free_coords(&self) -> &[usize] {
        &self.free
    }

    fn initial_state(&self, free: &[f64]) -> Vec<f64> {
        free.to_vec()
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        state.to_vec()
    }

    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0], vec![0.0])
    }

    fn scale_action(&self, _raw: &[f64]) -> Vec<f64> {
        vec![0.0]
    }

    fn step(&self, state: &[f64], _action: &[f64]) -> Vec<f64> {
        state.to_vec()
    }

    fn observe_box(&self, state: &IntervalBox) -> IntervalBox {
        state.clone()
    }

    fn scale_action_box(&self, _raw: &IntervalBox) -> IntervalBox {
        IntervalBox::point(&[0.0])
    }

    fn step_box(&self, state: &IntervalBox, _action: &IntervalBox) -> IntervalBox {
        state.clone()
    }
}
