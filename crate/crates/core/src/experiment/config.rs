//! Experiment configuration: one TOML file per run, plus built-in presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::EnergyConfig;
use crate::plant::{plant_by_name, SynthesisInit, SynthesisOptions};
use crate::repair::{AnnealConfig, GradientConfig, GradientMode, Method, RepairConfig};
use crate::region::Partition;
use crate::stl::parse_formula;
use crate::verifier::{CheckTemplate, VerifyConfig};
use crate::{Error, Result};

/// Deepest bisection the verifier accepts from a config (`4^8` sub-boxes in 2D).
pub const MAX_REFINE_DEPTH: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Isar,
    Grad,
    PlainSa,
    VerifyOnly,
}

impl MethodName {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "isar" => Ok(Self::Isar),
            "grad" => Ok(Self::Grad),
            "plain-sa" => Ok(Self::PlainSa),
            "verify-only" => Ok(Self::VerifyOnly),
            other => Err(Error::invalid(
                "method",
                format!("expected one of isar, grad, plain-sa, verify-only; got `{other}`"),
            )),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Isar => "isar",
            Self::Grad => "grad",
            Self::PlainSa => "plain-sa",
            Self::VerifyOnly => "verify-only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub steps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepairSection {
    /// Samples per region.
    pub k: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub tau0: f64,
    pub alpha: f64,
    pub max_iter: usize,
    pub barrier_floor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_attempts: Option<usize>,
    pub verification_guard: bool,
}

impl Default for RepairSection {
    fn default() -> Self {
        let e = EnergyConfig::default();
        let a = AnnealConfig::default();
        Self {
            k: e.k,
            lambda: e.lambda,
            sigma: a.sigma,
            tau0: a.tau0,
            alpha: a.alpha,
            max_iter: a.max_iter,
            barrier_floor: e.barrier_floor,
            max_rounds: None,
            region_attempts: None,
            verification_guard: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub refine_depth: u32,
    pub epsilon: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        let v = VerifyConfig::default();
        Self { refine_depth: v.refine_depth, epsilon: v.epsilon }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradientSection {
    pub mode: GradientMode,
    pub etas: Vec<f64>,
    pub steps: usize,
    pub fd_step: f64,
    pub beta: f64,
}

impl Default for GradientSection {
    fn default() -> Self {
        let g = GradientConfig::default();
        Self { mode: g.mode, etas: g.etas, steps: g.steps, fd_step: g.fd_step, beta: g.beta }
    }
}

/// Options for `controller = "synth"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSection {
    pub seed: u64,
    pub budget: usize,
    pub grid_points: usize,
    pub sigma: f64,
    pub restarts: usize,
    pub target_success: f64,
    /// Start from the zero network instead of the worst random draw.
    pub zero_init: bool,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        let s = SynthesisOptions::default();
        Self {
            seed: s.seed,
            budget: s.budget,
            grid_points: s.grid_points,
            sigma: s.sigma,
            restarts: s.restarts,
            target_success: s.target_success,
            zero_init: s.init == SynthesisInit::Zero,
        }
    }
}

impl SynthesisSection {
    pub fn options(&self) -> SynthesisOptions {
        SynthesisOptions {
            budget: self.budget,
            seed: self.seed,
            init: if self.zero_init { SynthesisInit::Zero } else { SynthesisInit::Random },
            grid_points: self.grid_points,
            sigma: self.sigma,
            restarts: self.restarts,
            target_success: self.target_success,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub plant: String,
    pub formula: String,
    #[serde(default = "default_method")]
    pub method: MethodName,
    #[serde(default)]
    pub seed: u64,
    /// `"golden"` for the bundled seed controller, `"synth"` to synthesize
    /// one, anything else is a weight-file path (relative to the config file).
    #[serde(default = "default_controller")]
    pub controller: String,
    /// Default artifact directory; the `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub partition: PartitionSection,
    #[serde(default)]
    pub repair: RepairSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub gradient: GradientSection,
    #[serde(default)]
    pub synthesis: SynthesisSection,
    /// Directory of the file this config was read from.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_method() -> MethodName {
    MethodName::Isar
}

fn default_controller() -> String {
    "golden".into()
}

fn field(name: &str, ok: bool, reason: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(name, reason()))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    field(name, v > 0.0 && v.is_finite(), || format!("must be finite and > 0, got {v}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every field against the domain of the module that consumes it.
    pub fn validate(&self) -> Result<()> {
        let plant = plant_by_name(&self.plant)?;
        let formula = parse_formula(&self.formula, &plant.signature()).map_err(|e| match e {
            Error::Syntax { .. } | Error::UnknownVariable(_) => Error::invalid("formula", e.to_string()),
            other => other,
        })?;
        field("formula", formula.horizon() <= plant.horizon(), || {
            format!("horizon {} exceeds the {} rollout length {}", formula.horizon(), self.plant, plant.horizon())
        })?;
        CheckTemplate::from_formula(&formula).map_err(|e| Error::invalid("formula", e.to_string()))?;

        let p = &self.partition;
        let dim = plant.free_coords().len();
        for (name, v) in [("partition.lower", &p.lower), ("partition.upper", &p.upper), ("partition.steps", &p.steps)] {
            field(name, v.len() == dim, || format!("needs {dim} values for plant {}, got {}", self.plant, v.len()))?;
            field(name, v.iter().all(|x| x.is_finite()), || "values must be finite".into())?;
        }
        for (i, (l, u)) in p.lower.iter().zip(&p.upper).enumerate() {
            field("partition.upper", l < u, || format!("coordinate {i}: upper {u} must exceed lower {l}"))?;
        }
        for &s in &p.steps {
            positive("partition.steps", s)?;
        }
        Partition::new(&p.lower, &p.upper, &p.steps).map_err(|e| Error::invalid("partition", e.to_string()))?;

        let r = &self.repair;
        field("repair.k", r.k >= 1, || "must be at least 1".into())?;
        field("repair.lambda", r.lambda >= 0.0 && r.lambda.is_finite(), || {
            format!("must be finite and >= 0, got {}", r.lambda)
        })?;
        positive("repair.sigma", r.sigma)?;
        positive("repair.tau0", r.tau0)?;
        field("repair.alpha", r.alpha > 0.0 && r.alpha < 1.0, || format!("must lie in (0, 1), got {}", r.alpha))?;
        field("repair.max_iter", r.max_iter >= 1, || "must be at least 1".into())?;
        field("repair.barrier_floor", r.barrier_floor < 0.0 && r.barrier_floor.is_finite(), || {
            format!("must be finite and negative, got {}", r.barrier_floor)
        })?;
        field("repair.max_rounds", r.max_rounds != Some(0), || "must be at least 1 when set".into())?;
        field("repair.region_attempts", r.region_attempts != Some(0), || "must be at least 1 when set".into())?;

        let v = &self.verify;
        field("verify.refine_depth", v.refine_depth <= MAX_REFINE_DEPTH, || {
            format!("must be at most {MAX_REFINE_DEPTH}, got {}", v.refine_depth)
        })?;
        field("verify.epsilon", v.epsilon >= 0.0 && v.epsilon.is_finite(), || {
            format!("must be finite and >= 0, got {}", v.epsilon)
        })?;

        let g = &self.gradient;
        field("gradient.etas", !g.etas.is_empty(), || "need at least one step size".into())?;
        for &eta in &g.etas {
            field("gradient.etas", eta >= 0.0 && eta.is_finite(), || format!("must be finite and >= 0, got {eta}"))?;
        }
        field("gradient.steps", g.steps >= 1, || "must be at least 1".into())?;
        positive("gradient.fd_step", g.fd_step)?;
        positive("gradient.beta", g.beta)?;

        let s = &self.synthesis;
        field("synthesis.budget", s.budget >= 1, || "must be at least 1".into())?;
        field("synthesis.grid_points", s.grid_points >= 1, || "must be at least 1".into())?;
        field("synthesis.restarts", s.restarts >= 1, || "must be at least 1".into())?;
        field("synthesis.sigma", s.sigma >= 0.0 && s.sigma.is_finite(), || {
            format!("must be finite and >= 0, got {}", s.sigma)
        })?;
        field("synthesis.target_success", s.target_success > 0.0 && s.target_success <= 1.0, || {
            format!("must lie in (0, 1], got {}", s.target_success)
        })?;

        field("controller", !self.controller.trim().is_empty(), || "must not be empty".into())
    }

    pub fn method(&self) -> Method {
        match self.method {
            MethodName::Isar => Method::Isar,
            MethodName::PlainSa => Method::PlainAnnealing,
            MethodName::VerifyOnly => Method::VerifyOnly,
            MethodName::Grad => Method::Gradient(GradientConfig {
                mode: self.gradient.mode,
                etas: self.gradient.etas.clone(),
                steps: self.gradient.steps,
                fd_step: self.gradient.fd_step,
                beta: self.gradient.beta,
            }),
        }
    }

    pub fn repair_config(&self, timing: bool) -> RepairConfig {
        let r = &self.repair;
        RepairConfig {
            energy: EnergyConfig { lambda: r.lambda, barrier_floor: r.barrier_floor, k: r.k },
            anneal: AnnealConfig { sigma: r.sigma, tau0: r.tau0, alpha: r.alpha, max_iter: r.max_iter },
            verify: VerifyConfig { refine_depth: self.verify.refine_depth, epsilon: self.verify.epsilon },
            seed: self.seed,
            max_rounds: r.max_rounds,
            region_attempts: r.region_attempts,
            verification_guard: r.verification_guard,
            timing,
        }
    }

    /// Weight-file path for a `controller` value that is neither `golden` nor `synth`.
    pub fn controller_path(&self) -> Option<PathBuf> {
        match self.controller.as_str() {
            "golden" | "synth" => None,
            p => {
                let p = PathBuf::from(p);
                Some(match &self.base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p,
                })
            }
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{}-{}", self.plant, self.method.as_str()))
    }
}

pub const PRESETS: &[&str] = &["uuv-small", "mc-small", "uuv-full", "mc-full"];

pub const UUV_FORMULA: &str = "G[0,30](y > 10 & y < 50)";
pub const MC_FORMULA: &str = "F[0,110](x >= 0.45)";
pub const UUV_BOX: ([f64; 2], [f64; 2]) = ([12.0, 10.0], [22.0, 30.0]);
pub const MC_BOX: ([f64; 2], [f64; 2]) = ([-0.505, -0.055], [0.395, 0.045]);

fn base(name: &str, plant: &str, formula: &str, bounds: ([f64; 2], [f64; 2]), steps: [f64; 2]) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.into()),
        plant: plant.into(),
        formula: formula.into(),
        method: MethodName::Isar,
        seed: 0,
        controller: default_controller(),
        output: None,
        partition: PartitionSection { lower: bounds.0.to_vec(), upper: bounds.1.to_vec(), steps: steps.to_vec() },
        repair: RepairSection::default(),
        verify: VerifySection::default(),
        gradient: GradientSection::default(),
        synthesis: SynthesisSection::default(),
        base_dir: None,
    }
}

/// Built-in configurations. The `-small` presets use a 10 x 10 partition,
/// fewer samples and an attempt cap so that a run takes minutes; the `-full`
/// presets use the fine partitions and default hyperparameters and take hours.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "uuv-small" => {
            let mut c = base(name, "uuv", UUV_FORMULA, UUV_BOX, [1.0, 2.0]);
            c.repair.k = 50;
            c.repair.region_attempts = Some(1);
            c
        }
        "mc-small" => {
            let mut c = base(name, "mc", MC_FORMULA, MC_BOX, [0.09, 0.01]);
            c.repair.k = 50;
            c.repair.region_attempts = Some(1);
            c.repair.max_rounds = Some(6);
            c
        }
        "uuv-full" => base(name, "uuv", UUV_FORMULA, UUV_BOX, [0.1, 1.0]),
        "mc-full" => base(name, "mc", MC_FORMULA, MC_BOX, [0.01, 0.01]),
        other => {
            return Err(Error::invalid(
                "preset",
                format!("unknown preset `{other}`; available: {}", PRESETS.join(", ")),
            ))
        }
    };
    Ok(cfg)
}
