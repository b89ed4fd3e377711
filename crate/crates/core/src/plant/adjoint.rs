//! Parameter gradient of the smoothed closed-loop robustness by
//! backpropagation through time. Plant Jacobians come from central
//! differences (states are low-dimensional); the network and the formula are
//! differentiated exactly.

use super::{check_controller, MlpParams, Plant};
use crate::stl::{smooth_robustness_grad, Formula, Trajectory};
use crate::{Error, Result};

/// Central-difference Jacobian of `f` at `x`, row-major `outputs x inputs`.
fn jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Vec<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let plus = f(&probe);
        probe[j] = x[j] - h;
        let minus = f(&probe);
        probe[j] = x[j];
        cols.push(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect::<Vec<f64>>());
    }
    let rows = cols.first().map_or(0, Vec::len);
    (0..rows).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

/// `J^T v`.
fn vjp(jac: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let cols = jac.first().map_or(0, Vec::len);
    let mut out = vec![0.0; cols];
    for (row, vi) in jac.iter().zip(v) {
        for (o, j) in out.iter_mut().zip(row) {
            *o += j * vi;
        }
    }
    out
}

/// Smoothed robustness of the rollout from `s0` and its gradient with respect
/// to `theta.to_flat()`.
pub fn smooth_rob_grad(
    plant: &dyn Plant,
    formula: &Formula,
    s0: &[f64],
    theta: &MlpParams,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    check_controller(plant, theta)?;
    let steps = formula.horizon();
    if steps > plant.horizon() {
        return Err(Error::HorizonTooShort { start: 0, needed: steps, available: plant.horizon() });
    }
    let n = plant.state_dim();
    let mut states = vec![s0.to_vec()];
    let mut obs = Vec::with_capacity(steps);
    let mut raw = Vec::with_capacity(steps);
    let mut actions = Vec::with_capacity(steps);
    for t in 0..steps {
        let o = plant.observe(&states[t]);
        let r = theta.forward(&o)?;
        let a = plant.scale_action(&r);
        states.push(plant.step(&states[t], &a));
        obs.push(o);
        raw.push(r);
        actions.push(a);
    }
    let traj = Trajectory::new(&states, plant.dt())?;
    let (value, g) = smooth_robustness_grad(formula, &traj, beta)?;

    let mut grad = vec![0.0; theta.num_params()];
    let mut lambda = g[steps * n..(steps + 1) * n].to_vec();
    for t in (0..steps).rev() {
        let (s, a) = (&states[t], &actions[t]);
        let js = jacobian(|x| plant.step(x, a), s);
        let ju = jacobian(|u| plant.step(s, u), a);
        let v_action = vjp(&ju, &lambda);
        let v_raw = vjp(&jacobian(|r| plant.scale_action(r), &raw[t]), &v_action);
        let v_obs = theta.backward(&obs[t], &v_raw, &mut grad)?;
        let v_state = vjp(&jacobian(|x| plant.observe(x), s), &v_obs);
        let through = vjp(&js, &lambda);
        lambda = (0..n).map(|i| g[t * n + i] + through[i] + v_state[i]).collect();
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{MountainCar, Uuv};
    use crate::rng::{stream, Purpose};
    use crate::stl::{parse_formula, smooth_robustness};

    fn check(plant: &dyn Plant, text: &str, arch: &crate::plant::Architecture, s0: &[f64], beta: f64) {
        let phi = parse_formula(text, &plant.signature()).unwrap();
        let theta = MlpParams::random(arch, &mut stream(11, Purpose::Synthesis, 0));
        let (v, g) = smooth_rob_grad(plant, &phi, s0, &theta, beta).unwrap();
        let eval = |t: &MlpParams| {
            let traj = crate::plant::rollout(plant, t, s0, plant.horizon()).unwrap();
            smooth_robustness(&phi, &traj, 0, beta).unwrap()
        };
        assert!((v - eval(&theta)).abs() < 1e-12);
        let flat = theta.to_flat();
        let h = 1e-5;
        let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-3);
        for i in (0..flat.len()).step_by(17) {
            let at = |d: f64| {
                let mut f = flat.clone();
                f[i] += d;
                eval(&theta.with_flat(&f).unwrap())
            };
            let num = (at(h) - at(-h)) / (2.0 * h);
            assert!((g[i] - num).abs() < 1e-4 * scale, "param {i}: {} vs {num}", g[i]);
        }
    }

    #[test]
    fn uuv_gradient_matches_finite_differences() {
        let plant = Uuv::default();
        check(&plant, "G[0,30](y > 10 & y < 50)", &Uuv::architecture(), &plant.initial_state(&[15.0, 20.0]), 2.0);
    }

    #[test]
    fn mc_gradient_matches_finite_differences() {
        let plant = MountainCar::default();
        check(&plant, "F[0,110](x >= 0.45)", &MountainCar::architecture(), &plant.initial_state(&[-0.3, 0.01]), 20.0);
    }
}
