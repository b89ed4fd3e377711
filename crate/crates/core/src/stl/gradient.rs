//! Reverse-mode gradient of the smoothed robustness with respect to every
//! trajectory sample.

use super::{smooth_robustness, Formula, Trajectory, DEFAULT_TOP};
use crate::Result;

/// Soft-max weights `exp(b (v_i - max)) / sum`; soft-min when `b < 0`.
fn soft_weights(values: &[f64], b: f64) -> Vec<f64> {
    let m = if b > 0.0 {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let e: Vec<f64> = values.iter().map(|v| (b * (v - m)).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|x| x / sum).collect()
}

fn soft(values: &[f64], b: f64) -> f64 {
    let m = if b > 0.0 {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let sum: f64 = values.iter().map(|v| (b * (v - m)).exp()).sum();
    m + sum.ln() / b
}

/// Forward pass that keeps every intermediate signal.
struct Node {
    values: Vec<f64>,
    children: Vec<Node>,
}

fn forward(f: &Formula, traj: &Trajectory, b: f64) -> Node {
    let n = traj.len() - f.horizon();
    let leaf = |values| Node { values, children: Vec::new() };
    match f {
        Formula::True => leaf(vec![DEFAULT_TOP; n]),
        Formula::Predicate(p) => leaf((0..n).map(|t| p.margin(traj.state(t))).collect()),
        Formula::Not(g) => {
            let c = forward(g, traj, b);
            Node { values: c.values.iter().map(|v| -v).collect(), children: vec![c] }
        }
        Formula::And(x, y) | Formula::Or(x, y) => {
            let (cx, cy) = (forward(x, traj, b), forward(y, traj, b));
            let sharp = if matches!(f, Formula::And(..)) { -b } else { b };
            let values = (0..n).map(|i| soft(&[cx.values[i], cy.values[i]], sharp)).collect();
            Node { values, children: vec![cx, cy] }
        }
        Formula::Globally(w, g) | Formula::Finally(w, g) => {
            let c = forward(g, traj, b);
            let sharp = if matches!(f, Formula::Globally(..)) { -b } else { b };
            let values = (0..n).map(|i| soft(&c.values[i + w.start..=i + w.end], sharp)).collect();
            Node { values, children: vec![c] }
        }
        Formula::Until(w, l, r) => {
            let (cl, cr) = (forward(l, traj, b), forward(r, traj, b));
            let values = (0..n)
                .map(|i| {
                    let cands: Vec<f64> =
                        (i + w.start..=i + w.end).map(|k| soft(&until_guard(&cl.values, &cr.values, i, k), -b)).collect();
                    soft(&cands, b)
                })
                .collect();
            Node { values, children: vec![cl, cr] }
        }
    }
}

/// `[rhs[k], lhs[i], .., lhs[k-1]]`.
fn until_guard(lhs: &[f64], rhs: &[f64], i: usize, k: usize) -> Vec<f64> {
    std::iter::once(rhs[k]).chain(lhs[i..k].iter().copied()).collect()
}

fn backward(f: &Formula, node: &Node, traj: &Trajectory, b: f64, adj: &[f64], grad: &mut [f64]) {
    let dim = traj.dim();
    match f {
        Formula::True => {}
        Formula::Predicate(p) => {
            let sign = if p.cmp.is_lower_bound() { 1.0 } else { -1.0 };
            for (t, &a) in adj.iter().enumerate() {
                for &(idx, c) in &p.expr.terms {
                    grad[t * dim + idx] += sign * c * a;
                }
            }
        }
        Formula::Not(g) => {
            let child: Vec<f64> = adj.iter().map(|a| -a).collect();
            backward(g, &node.children[0], traj, b, &child, grad);
        }
        Formula::And(x, y) | Formula::Or(x, y) => {
            let sharp = if matches!(f, Formula::And(..)) { -b } else { b };
            let (cx, cy) = (&node.children[0], &node.children[1]);
            let mut ax = vec![0.0; cx.values.len()];
            let mut ay = vec![0.0; cy.values.len()];
            for (i, &a) in adj.iter().enumerate() {
                let w = soft_weights(&[cx.values[i], cy.values[i]], sharp);
                ax[i] += a * w[0];
                ay[i] += a * w[1];
            }
            backward(x, cx, traj, b, &ax, grad);
            backward(y, cy, traj, b, &ay, grad);
        }
        Formula::Globally(w, g) | Formula::Finally(w, g) => {
            let sharp = if matches!(f, Formula::Globally(..)) { -b } else { b };
            let c = &node.children[0];
            let mut ac = vec![0.0; c.values.len()];
            for (i, &a) in adj.iter().enumerate() {
                let ws = soft_weights(&c.values[i + w.start..=i + w.end], sharp);
                for (j, wj) in ws.iter().enumerate() {
                    ac[i + w.start + j] += a * wj;
                }
            }
            backward(g, c, traj, b, &ac, grad);
        }
        Formula::Until(w, l, r) => {
            let (cl, cr) = (&node.children[0], &node.children[1]);
            let mut al = vec![0.0; cl.values.len()];
            let mut ar = vec![0.0; cr.values.len()];
            for (i, &a) in adj.iter().enumerate() {
                let guards: Vec<Vec<f64>> =
                    (i + w.start..=i + w.end).map(|k| until_guard(&cl.values, &cr.values, i, k)).collect();
                let cands: Vec<f64> = guards.iter().map(|g| soft(g, -b)).collect();
                let outer = soft_weights(&cands, b);
                for (off, (g, wo)) in guards.iter().zip(&outer).enumerate() {
                    let k = i + w.start + off;
                    let inner = soft_weights(g, -b);
                    ar[k] += a * wo * inner[0];
                    for (j, wi) in inner[1..].iter().enumerate() {
                        al[i + j] += a * wo * wi;
                    }
                }
            }
            backward(l, cl, traj, b, &al, grad);
            backward(r, cr, traj, b, &ar, grad);
        }
    }
}

/// Smoothed robustness at step 0 and its gradient with respect to the
/// trajectory, laid out like the trajectory data (`len x dim`, row-major).
pub fn smooth_robustness_grad(formula: &Formula, traj: &Trajectory, beta: f64) -> Result<(f64, Vec<f64>)> {
    // Validates beta, horizon and dimensions.
    let value = smooth_robustness(formula, traj, 0, beta)?;
    let b = beta * formula.aggregation_depth().max(1) as f64;
    let root = forward(formula, traj, b);
    let mut adj = vec![0.0; root.values.len()];
    adj[0] = 1.0;
    let mut grad = vec![0.0; traj.len() * traj.dim()];
    backward(formula, &root, traj, b, &adj, &mut grad);
    Ok((value, grad))
}
