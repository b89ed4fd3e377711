//! Sound but incomplete region verifier: interval boxes pushed through the
//! closed loop, with optional uniform refinement of the region.
//!
//! A `true` answer proves every initial state of the region satisfies the
//! task. `false` proves nothing.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::interval::{Interval, IntervalBox};
use crate::plant::{MlpParams, Plant};
use crate::region::Region;
use crate::stl::{Formula, Predicate, Window};
use crate::{Error, Result};

/// Bound magnitude past which propagation is declared divergent.
pub const DIVERGENCE_CAP: f64 = 1e6;

/// Boxes `box_0 .. box_steps` enclosing every closed-loop state reachable
/// from `box0` under `theta`.
pub fn propagate_box(
    plant: &dyn Plant,
    theta: &MlpParams,
    box0: &IntervalBox,
    steps: usize,
) -> Result<Vec<IntervalBox>> {
    if box0.dim() != plant.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial box",
            expected: plant.state_dim(),
            got: box0.dim(),
        });
    }
    let mut boxes = Vec::with_capacity(steps + 1);
    boxes.push(box0.clone());
    let mut current = box0.clone();
    for step in 1..=steps {
        let raw = theta.forward_box(&plant.observe_box(&current))?;
        let action = plant.scale_action_box(&raw);
        current = plant.step_box(&current, &action);
        if !(current.max_magnitude() <= DIVERGENCE_CAP) {
            return Err(Error::Divergence { step, cap: DIVERGENCE_CAP });
        }
        boxes.push(current.clone());
    }
    Ok(boxes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// Every predicate holds at every step of the window.
    Always,
    /// At some step of the window every predicate holds at once.
    Eventually,
}

/// A formula reduced to a form the box check can decide soundly:
/// `G[a,b](p1 & ... & pn)` or `F[a,b](p1 & ... & pn)` over linear predicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckTemplate {
    pub kind: CheckKind,
    pub window: Window,
    pub predicates: Vec<Predicate>,
}

fn conjuncts(f: &Formula, out: &mut Vec<Predicate>) -> bool {
    match f {
        Formula::Predicate(p) => {
            out.push(p.clone());
            true
        }
        Formula::And(a, b) => conjuncts(a, out) && conjuncts(b, out),
        Formula::True => true,
        _ => false,
    }
}

impl CheckTemplate {
    pub fn from_formula(formula: &Formula) -> Result<Self> {
        let (kind, window, body) = match formula {
            Formula::Globally(w, body) => (CheckKind::Always, *w, body),
            Formula::Finally(w, body) => (CheckKind::Eventually, *w, body),
            _ => {
                return Err(Error::UnsupportedFormula(
                    "top level must be G[a,b] or F[a,b]".into(),
                ))
            }
        };
        let mut predicates = Vec::new();
        if !conjuncts(body, &mut predicates) {
            return Err(Error::UnsupportedFormula(
                "temporal operand must be a conjunction of predicates".into(),
            ));
        }
        Ok(Self { kind, window, predicates })
    }

    pub fn horizon(&self) -> usize {
        self.window.end
    }

    /// Whether every state in `state` provably satisfies all predicates with
    /// margin `epsilon` (strictly above it for strict comparisons).
    pub fn box_satisfies(&self, state: &IntervalBox, epsilon: f64) -> bool {
        self.predicates.iter().all(|p| {
            let lb = margin_lower_bound(p, state);
            if p.cmp.is_strict() {
                lb > epsilon
            } else {
                lb >= epsilon
            }
        })
    }

    pub fn check(&self, boxes: &[IntervalBox], epsilon: f64) -> bool {
        let window = &boxes[self.window.start..=self.window.end];
        match self.kind {
            CheckKind::Always => window.iter().all(|b| self.box_satisfies(b, epsilon)),
            CheckKind::Eventually => window.iter().any(|b| self.box_satisfies(b, epsilon)),
        }
    }
}

/// Outward-rounded lower bound of the predicate margin over a box.
pub fn margin_lower_bound(p: &Predicate, state: &IntervalBox) -> f64 {
    let value = p
        .expr
        .terms
        .iter()
        .fold(Interval::point(p.expr.constant), |acc, &(i, c)| {
            acc.add(state.dims[i].scale(c))
        });
    let margin = if p.cmp.is_lower_bound() {
        value.add_scalar(-p.threshold)
    } else {
        value.neg().add_scalar(p.threshold)
    };
    margin.lo
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Each free dimension is split `2^refine_depth` ways.
    pub refine_depth: u32,
    pub epsilon: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { refine_depth: 2, epsilon: 0.0 }
    }
}

/// Verifies one box over the free coordinates without refinement.
fn verify_box(
    plant: &dyn Plant,
    template: &CheckTemplate,
    theta: &MlpParams,
    lower: &[f64],
    upper: &[f64],
    epsilon: f64,
) -> Result<bool> {
    let box0 = plant.initial_box(lower, upper);
    match propagate_box(plant, theta, &box0, template.horizon()) {
        Ok(boxes) => Ok(template.check(&boxes, epsilon)),
        // Bounds that blow up cannot prove anything.
        Err(Error::Divergence { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

pub fn verify_region(
    plant: &dyn Plant,
    template: &CheckTemplate,
    theta: &MlpParams,
    region: &Region,
    cfg: &VerifyConfig,
) -> Result<bool> {
    if template.horizon() > plant.horizon() {
        return Err(Error::HorizonTooShort {
            start: 0,
            needed: template.horizon(),
            available: plant.horizon(),
        });
    }
    if region.dim() != plant.free_coords().len() {
        return Err(Error::DimensionMismatch {
            context: "region vs free coordinates",
            expected: plant.free_coords().len(),
            got: region.dim(),
        });
    }
    let splits = 1usize << cfg.refine_depth;
    for sub in region.subdivide(splits) {
        if !verify_box(plant, template, theta, &sub.lower, &sub.upper, cfg.epsilon)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One line of the verification log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub region: usize,
    pub verified: bool,
    pub refine_depth: u32,
    /// Seconds; only filled when timing is requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seconds: Option<f64>,
}

/// Verifies every region in parallel; records come back in region order.
pub fn verify_all(
    plant: &dyn Plant,
    template: &CheckTemplate,
    theta: &MlpParams,
    regions: &[Region],
    cfg: &VerifyConfig,
    timing: bool,
) -> Result<Vec<VerificationRecord>> {
    regions
        .par_iter()
        .map(|r| {
            let start = Instant::now();
            let verified = verify_region(plant, template, theta, r, cfg)?;
            Ok(VerificationRecord {
                region: r.id,
                verified,
                refine_depth: cfg.refine_depth,
                seconds: timing.then(|| start.elapsed().as_secs_f64()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{rob, rollout, MountainCar, Uuv};
    use crate::rng::{stream, Purpose};
    use crate::stl::parse_formula;

    fn uuv_phi(plant: &Uuv) -> Formula {
        parse_formula("G[0,30](y > 10 & y < 50)", &plant.signature()).unwrap()
    }

    #[test]
    fn templates() {
        let uuv = Uuv::default();
        let t = CheckTemplate::from_formula(&uuv_phi(&uuv)).unwrap();
        assert_eq!(t.kind, CheckKind::Always);
        assert_eq!(t.predicates.len(), 2);
        let mc = MountainCar::default();
        let f = parse_formula("F[0,110](x >= 0.45)", &mc.signature()).unwrap();
        assert_eq!(CheckTemplate::from_formula(&f).unwrap().kind, CheckKind::Eventually);
        for bad in ["x >= 0.45", "F[0,5](G[0,2](x > 0))", "G[0,5](x > 0 | v > 0)", "U[0,3](x > 0, v > 0)"] {
            let f = parse_formula(bad, &mc.signature()).unwrap();
            let err = CheckTemplate::from_formula(&f).unwrap_err();
            assert_eq!(err.kind(), "unsupported_formula", "{bad}");
        }
    }

    #[test]
    fn point_box_matches_rollout() {
        let plant = Uuv::default();
        let mut rng = stream(11, Purpose::Audit, 0);
        // Damped so the loop does not amplify one-ulp rounding slack.
        let theta = MlpParams::random(&Uuv::architecture(), &mut rng);
        let damped: Vec<f64> = theta.to_flat().iter().map(|w| 0.3 * w).collect();
        let theta = theta.with_flat(&damped).unwrap();
        let s0 = plant.initial_state(&[15.0, 20.0]);
        let boxes = propagate_box(&plant, &theta, &IntervalBox::point(&s0), 30).unwrap();
        let traj = rollout(&plant, &theta, &s0, 30).unwrap();
        assert_eq!(boxes.len(), 31);
        for (t, b) in boxes.iter().enumerate() {
            for (d, iv) in b.dims.iter().enumerate() {
                let x = traj.state(t)[d];
                assert!(iv.contains(x));
                assert!(iv.width() < 1e-9, "t={t} d={d} width={}", iv.width());
            }
        }
    }

    #[test]
    fn straight_uuv_widths_never_shrink() {
        let plant = Uuv::default();
        let theta = MlpParams::zeros(&Uuv::architecture());
        let box0 = plant.initial_box(&[12.0, 10.0], &[13.0, 12.0]);
        let boxes = propagate_box(&plant, &theta, &box0, 30).unwrap();
        for w in boxes.windows(2) {
            for d in 0..4 {
                assert!(w[1].dims[d].width() >= w[0].dims[d].width());
            }
        }
    }

    #[test]
    fn point_region_verifies_when_rollout_has_margin() {
        let plant = Uuv::default();
        let phi = uuv_phi(&plant);
        let template = CheckTemplate::from_formula(&phi).unwrap();
        let theta = MlpParams::zeros(&Uuv::architecture());
        let region = Region { id: 0, lower: vec![15.0, 10.0], upper: vec![15.0 + 1e-12, 10.0 + 1e-12] };
        assert!(rob(&plant, &phi, &plant.initial_state(&region.lower), &theta).unwrap() > 0.0);
        assert!(verify_region(&plant, &template, &theta, &region, &VerifyConfig::default()).unwrap());
    }

    #[test]
    fn region_with_failing_state_is_rejected() {
        let plant = MountainCar::default();
        let phi = parse_formula("F[0,110](x >= 0.45)", &plant.signature()).unwrap();
        let template = CheckTemplate::from_formula(&phi).unwrap();
        let theta = MlpParams::zeros(&MountainCar::architecture());
        let region = Region { id: 0, lower: vec![-0.5, -0.01], upper: vec![-0.4, 0.0] };
        assert!(rob(&plant, &phi, &plant.initial_state(&region.center()), &theta).unwrap() < 0.0);
        for depth in 0..3 {
            let cfg = VerifyConfig { refine_depth: depth, epsilon: 0.0 };
            assert!(!verify_region(&plant, &template, &theta, &region, &cfg).unwrap());
        }
    }

    #[test]
    fn divergent_bounds_are_an_error() {
        let plant = crate::plant::Integrator { horizon: 3 };
        let theta = MlpParams::zeros(&crate::plant::Integrator::architecture());
        let box0 = IntervalBox::new(&[-2e6], &[2e6]).unwrap();
        let err = propagate_box(&plant, &theta, &box0, 3).unwrap_err();
        assert_eq!(err.kind(), "divergence");
    }
}
