//! Repair of neural feedback controllers with preservation of verified behavior.
//!
//! The pipeline partitions the initial-state space into boxes, verifies each box
//! with a sound interval-reachability check, then repairs failing boxes one at a
//! time with simulated annealing on a log-barrier energy. Every accepted parameter
//! update keeps the sampled robustness of all protected boxes non-negative.
//!
//! Modules, bottom-up:
//! - [`stl`]: formulas, parser, exact and smoothed quantitative robustness.
//! - [`plant`]: MLP controllers, plant models, rollouts and the robustness subroutine.
//! - [`region`]: rectangular partitions, sampling, three-way classification.
//! - [`interval`] and [`verifier`]: interval bound propagation through the closed loop.
//! - [`energy`]: barrier-guarded Monte Carlo energy.
//! - [`repair`]: safeguarded annealing, the incremental repair driver and baselines.
//! - [`experiment`]: configs, presets, artifact writing and report rendering.

pub mod energy;
pub mod error;
pub mod experiment;
pub mod interval;
pub mod plant;
pub mod region;
pub mod repair;
pub mod rng;
pub mod stl;
pub mod verifier;

pub use error::{Error, Result};
