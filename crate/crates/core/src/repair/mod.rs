//! Incremental repair: verify, sample, then fix failed regions one at a time
//! with safeguarded annealing while protecting everything already correct.
//!
//! The same driver runs the two baselines by swapping the inner optimizer.

mod anneal;
mod gradient;
mod report;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use anneal::{
    metropolis_accept, safeguarded_sim_annealing, AnnealConfig, AnnealOutcome, Guard, IterationRecord, LogTag,
};
pub use gradient::{
    finite_difference_gradient, gradient_ascent, gradient_round, AscentPath, GradientConfig, GradientMode, GradientOutcome,
    GradientRecord,
};
pub use report::{Count, MinRobStats, RepairReport, ReportRow, Stat, REPORT_FORMAT, REPORT_VERSION};

use crate::energy::EnergyConfig;
use crate::plant::{rob_many, MlpParams, Plant};
use crate::region::{classify, sample_region, sort_failed, PartitionState, Region};
use crate::rng::{stream, Purpose};
use crate::stl::Formula;
use crate::verifier::{verify_all, verify_region, CheckTemplate, VerificationRecord, VerifyConfig};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Isar,
    /// No protection: zero barrier weight, empty protected set, no safeguard.
    PlainAnnealing,
    Gradient(GradientConfig),
    VerifyOnly,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Isar => "isar",
            Method::PlainAnnealing => "plain-sa",
            Method::Gradient(_) => "grad",
            Method::VerifyOnly => "verify-only",
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Method::Isar => "ISAR",
            Method::PlainAnnealing => "Non-safeguarded SA",
            Method::Gradient(_) => "Gradient ascent",
            Method::VerifyOnly => "Verification",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairConfig {
    pub energy: EnergyConfig,
    pub anneal: AnnealConfig,
    pub verify: VerifyConfig,
    pub seed: u64,
    /// Stop after this many repair rounds even if failed regions remain.
    pub max_rounds: Option<usize>,
    /// Quarantine a head region after this many rounds that leave it failed,
    /// even when the parameters moved.
    pub region_attempts: Option<usize>,
    /// ISAR only: additionally reject annealing moves under which a region
    /// verified before repair no longer verifies.
    pub verification_guard: bool,
    pub timing: bool,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            energy: EnergyConfig::default(),
            anneal: AnnealConfig::default(),
            verify: VerifyConfig::default(),
            seed: 0,
            max_rounds: None,
            region_attempts: None,
            verification_guard: true,
            timing: false,
        }
    }
}

/// One pass of the main loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub region: usize,
    pub repair_samples: usize,
    pub protected_samples: usize,
    pub changed: bool,
    /// The head region was moved to the quarantined tail, either because the
    /// optimizer could not move the parameters or because it ran out of
    /// attempts.
    pub quarantined: bool,
    pub promoted: Vec<usize>,
    /// Failed regions left after the round, quarantined ones included.
    pub failed_remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LogRecord {
    Anneal(IterationRecord),
    Gradient(GradientRecord),
    Round(RoundRecord),
}

/// Wall-clock breakdown; only collected on request since it breaks
/// byte-for-byte reproducibility of the artifacts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub verification_seconds: f64,
    pub verification_per_region_seconds: f64,
    pub optimizer_seconds: f64,
    pub optimizer_per_iter_seconds: f64,
    pub robustness_check_seconds: f64,
    pub robustness_check_per_round_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RepairRun {
    pub theta: MlpParams,
    pub initial: PartitionState,
    /// Equal to `initial` for verify-only runs.
    pub final_state: PartitionState,
    pub verification_before: Vec<VerificationRecord>,
    pub verification_after: Vec<VerificationRecord>,
    pub log: Vec<LogRecord>,
    pub report: RepairReport,
    pub timing: Option<Timing>,
}

impl RepairRun {
    pub fn rounds(&self) -> impl Iterator<Item = &RoundRecord> {
        self.log.iter().filter_map(|r| match r {
            LogRecord::Round(r) => Some(r),
            _ => None,
        })
    }

    pub fn anneal_records(&self) -> impl Iterator<Item = &IterationRecord> {
        self.log.iter().filter_map(|r| match r {
            LogRecord::Anneal(r) => Some(r),
            _ => None,
        })
    }
}

/// Everything fixed for the duration of a run.
pub struct RepairProblem<'a> {
    pub plant: &'a dyn Plant,
    pub formula: &'a Formula,
    pub template: CheckTemplate,
    pub regions: Vec<Region>,
}

impl<'a> RepairProblem<'a> {
    pub fn new(plant: &'a dyn Plant, formula: &'a Formula, regions: Vec<Region>) -> Result<Self> {
        let template = CheckTemplate::from_formula(formula)?;
        Ok(Self { plant, formula, template, regions })
    }
}

fn full_states(plant: &dyn Plant, free: &[Vec<f64>]) -> Vec<Vec<f64>> {
    free.iter().map(|p| plant.initial_state(p)).collect()
}

/// Robustness of every sample of the listed regions, written back in place.
fn reevaluate(
    plant: &dyn Plant,
    formula: &Formula,
    theta: &MlpParams,
    ids: &[usize],
    states: &[Vec<Vec<f64>>],
    robustness: &mut [Vec<f64>],
) -> Result<()> {
    let flat: Vec<Vec<f64>> = ids.iter().flat_map(|&i| states[i].iter().cloned()).collect();
    let robs = rob_many(plant, formula, &flat, theta)?;
    let mut it = robs.into_iter();
    for &i in ids {
        for r in robustness[i].iter_mut() {
            *r = it.next().expect("one value per sample");
        }
    }
    Ok(())
}

fn flags(records: &[VerificationRecord]) -> Vec<bool> {
    records.iter().map(|r| r.verified).collect()
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

pub fn run_repair(
    problem: &RepairProblem<'_>,
    theta0: &MlpParams,
    cfg: &RepairConfig,
    method: &Method,
) -> Result<RepairRun> {
    cfg.energy.validate()?;
    if !matches!(method, Method::VerifyOnly) {
        cfg.anneal.validate()?;
    }
    if let Method::Gradient(g) = method {
        g.validate()?;
    }
    let started = Instant::now();
    let (plant, formula) = (problem.plant, problem.formula);
    let m = problem.regions.len();
    let mut timing = Timing::default();

    // Preparation: verify, sample, evaluate, classify.
    let t = Instant::now();
    let verification_before = verify_all(plant, &problem.template, theta0, &problem.regions, &cfg.verify, cfg.timing)?;
    timing.verification_seconds += secs(t);

    let samples: Vec<Vec<Vec<f64>>> = problem
        .regions
        .iter()
        .map(|r| sample_region(r, cfg.energy.k, cfg.seed))
        .collect::<Result<_>>()?;
    let states: Vec<Vec<Vec<f64>>> = samples.iter().map(|s| full_states(plant, s)).collect();
    let mut robustness: Vec<Vec<f64>> = samples.iter().map(|s| vec![0.0; s.len()]).collect();
    let all: Vec<usize> = (0..m).collect();
    let t = Instant::now();
    reevaluate(plant, formula, theta0, &all, &states, &mut robustness)?;
    timing.robustness_check_seconds += secs(t);

    let initial = classify(problem.regions.clone(), samples.clone(), flags(&verification_before), robustness.clone())?;
    let mut report = RepairReport::new(plant.name(), method.name(), m);

    if matches!(method, Method::VerifyOnly) {
        let mut row = RepairReport::before_row(&initial, false);
        row.label = method.label().into();
        report.rows.push(row);
        timing.total_seconds = secs(started);
        return Ok(RepairRun {
            theta: theta0.clone(),
            final_state: initial.clone(),
            initial,
            verification_after: verification_before.clone(),
            verification_before,
            log: Vec::new(),
            report,
            timing: cfg.timing.then_some(timing),
        });
    }

    let protect = !matches!(method, Method::PlainAnnealing);
    let energy_cfg = if protect { cfg.energy } else { EnergyConfig { lambda: 0.0, ..cfg.energy } };
    let mut protected_ids: Vec<usize> = if protect { initial.protected.clone() } else { Vec::new() };
    let mut protected_states: Vec<Vec<f64>> =
        protected_ids.iter().flat_map(|&i| states[i].iter().cloned()).collect();
    let guarded: Vec<&Region> = if matches!(method, Method::Isar) && cfg.verification_guard {
        initial.protected.iter().map(|&i| &problem.regions[i]).collect()
    } else {
        Vec::new()
    };
    let still_verified = |candidate: &MlpParams| -> Result<bool> {
        let ok = guarded
            .par_iter()
            .map(|r| verify_region(plant, &problem.template, candidate, r, &cfg.verify))
            .collect::<Result<Vec<bool>>>()?;
        Ok(ok.into_iter().all(|v| v))
    };
    let guard: Option<Guard<'_>> = (!guarded.is_empty()).then_some(&still_verified as Guard<'_>);
    let mut attempts = vec![0usize; m];
    let mut active: Vec<usize> = initial.failed.clone();
    let mut quarantined: Vec<usize> = Vec::new();
    let mut theta = theta0.clone();
    let mut log = Vec::new();
    let mut round = 0;
    let mut optimizer_iters = 0usize;

    // Main loop: repair the head region, re-evaluate, promote.
    while let Some(&head) = active.first() {
        if cfg.max_rounds.is_some_and(|cap| round >= cap) {
            break;
        }
        let repair: Vec<Vec<f64>> = states[head]
            .iter()
            .zip(&robustness[head])
            .filter(|(_, &r)| r < 0.0)
            .map(|(s, _)| s.clone())
            .collect();
        let t = Instant::now();
        let (next, changed) = match method {
            Method::Isar | Method::PlainAnnealing => {
                let mut rng = stream(cfg.seed, Purpose::Annealing, round as u64);
                let out = safeguarded_sim_annealing(
                    plant,
                    formula,
                    &repair,
                    &protected_states,
                    &theta,
                    &energy_cfg,
                    &cfg.anneal,
                    protect,
                    guard,
                    LogTag { round, region: head },
                    &mut rng,
                )?;
                optimizer_iters += out.log.len();
                log.extend(out.log.into_iter().map(LogRecord::Anneal));
                (out.theta, out.changed)
            }
            Method::Gradient(g) => {
                let out = gradient_round(plant, formula, &repair, &protected_states, &theta, &energy_cfg, g, round, head)?;
                optimizer_iters += g.etas.len() * g.steps;
                log.extend(out.log.into_iter().map(LogRecord::Gradient));
                (out.theta, out.changed)
            }
            Method::VerifyOnly => unreachable!("handled above"),
        };
        timing.optimizer_seconds += secs(t);

        let mut promoted = Vec::new();
        let mut was_quarantined = false;
        attempts[head] += 1;
        if changed {
            theta = next;
            let t = Instant::now();
            let pending: Vec<usize> = active.iter().chain(&quarantined).copied().collect();
            reevaluate(plant, formula, &theta, &pending, &states, &mut robustness)?;
            timing.robustness_check_seconds += secs(t);
            let repaired = |i: &usize| robustness[*i].iter().all(|&r| r >= 0.0);
            promoted = pending.iter().copied().filter(|i| repaired(i)).collect();
            promoted.sort_unstable();
            active.retain(|i| !repaired(i));
            quarantined.retain(|i| !repaired(i));
            sort_failed(&mut active, &robustness);
            if protect {
                for &i in &promoted {
                    protected_ids.push(i);
                    protected_states.extend(states[i].iter().cloned());
                }
            }
            if cfg.region_attempts.is_some_and(|cap| attempts[head] >= cap) {
                if let Some(pos) = active.iter().position(|&i| i == head) {
                    active.remove(pos);
                    quarantined.push(head);
                    was_quarantined = true;
                }
            }
        } else {
            active.remove(0);
            quarantined.push(head);
            was_quarantined = true;
        }
        log.push(LogRecord::Round(RoundRecord {
            round,
            region: head,
            repair_samples: repair.len(),
            protected_samples: protected_states.len(),
            changed,
            quarantined: was_quarantined,
            promoted,
            failed_remaining: active.len() + quarantined.len(),
        }));
        round += 1;
    }

    // Final verification and a fresh robustness sweep over every region.
    let t = Instant::now();
    let verification_after = verify_all(plant, &problem.template, &theta, &problem.regions, &cfg.verify, cfg.timing)?;
    timing.verification_seconds += secs(t);
    let mut final_robustness = robustness;
    let t = Instant::now();
    reevaluate(plant, formula, &theta, &all, &states, &mut final_robustness)?;
    timing.robustness_check_seconds += secs(t);
    let final_state = classify(problem.regions.clone(), samples, flags(&verification_after), final_robustness)?;

    report.rows.push(RepairReport::before_row(&initial, true));
    let (row, broken, repaired) = RepairReport::after_row(method.label(), &initial, &final_state);
    report.rows.push(row);
    report.rounds = round;
    report.broken_regions = broken;
    report.repaired_regions = repaired;

    timing.total_seconds = secs(started);
    if m > 0 {
        timing.verification_per_region_seconds = timing.verification_seconds / (2 * m) as f64;
    }
    if optimizer_iters > 0 {
        timing.optimizer_per_iter_seconds = timing.optimizer_seconds / optimizer_iters as f64;
    }
    timing.robustness_check_per_round_seconds = timing.robustness_check_seconds / (round + 2) as f64;

    Ok(RepairRun {
        theta,
        initial,
        final_state,
        verification_before,
        verification_after,
        log,
        report,
        timing: cfg.timing.then_some(timing),
    })
}

pub fn isar(problem: &RepairProblem<'_>, theta: &MlpParams, cfg: &RepairConfig) -> Result<RepairRun> {
    run_repair(problem, theta, cfg, &Method::Isar)
}

pub fn baseline_plain_annealing(problem: &RepairProblem<'_>, theta: &MlpParams, cfg: &RepairConfig) -> Result<RepairRun> {
    run_repair(problem, theta, cfg, &Method::PlainAnnealing)
}

pub fn baseline_gradient_ascent(
    problem: &RepairProblem<'_>,
    theta: &MlpParams,
    cfg: &RepairConfig,
    gradient: &GradientConfig,
) -> Result<RepairRun> {
    run_repair(problem, theta, cfg, &Method::Gradient(gradient.clone()))
}
