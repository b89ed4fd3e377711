//! Experiment orchestration: resolve a config into a plant, formula,
//! partition and seed controller, run one method, and write the artifact
//! directory.
//!
//! Artifacts are plain JSON, JSONL, TOML and CSV files, each starting with a
//! format tag and version. Without `--timing` a run is a pure function of its
//! config, so two runs with the same seed produce identical directories.

mod config;
mod render;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{
    preset, ExperimentConfig, GradientSection, MethodName, PartitionSection, RepairSection, SynthesisSection,
    VerifySection, MAX_REFINE_DEPTH, MC_BOX, MC_FORMULA, PRESETS, UUV_BOX, UUV_FORMULA,
};
pub use render::{
    emit_plot_data, format_count, format_stat, read_report, read_snapshot, render_report, report_render,
    write_plot_data, PLOT_HEADER,
};

use crate::plant::{plant_by_name, synthesize_seed_controller, Architecture, Integrator, MlpParams, MountainCar, Plant, Uuv};
use crate::region::{ClassificationSnapshot, Partition, PartitionState};
use crate::repair::{run_repair, RepairProblem, RepairRun};
use crate::stl::parse_formula;
use crate::verifier::VerificationRecord;
use crate::{Error, Result};

const GOLDEN_UUV: &str = include_str!("../../golden/uuv_seed.json");
const GOLDEN_MC: &str = include_str!("../../golden/mc_seed.json");

pub const CONFIG_FILE: &str = "config.toml";
pub const WEIGHTS_INITIAL_FILE: &str = "weights_initial.json";
pub const WEIGHTS_FINAL_FILE: &str = "weights_final.json";
pub const VERIFICATION_LOG_FILE: &str = "verification_log.jsonl";
pub const ITERATION_LOG_FILE: &str = "iteration_log.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REGIONS_BEFORE_FILE: &str = "regions_before.json";
pub const REGIONS_AFTER_FILE: &str = "regions_after.json";
pub const PLOT_BEFORE_FILE: &str = "plot_before.csv";
pub const PLOT_AFTER_FILE: &str = "plot_after.csv";
pub const TIMING_FILE: &str = "timing.json";
pub const ERROR_FILE: &str = "error.json";

pub const VERIFICATION_LOG_FORMAT: &str = "isar-verification-log";
pub const ITERATION_LOG_FORMAT: &str = "isar-iteration-log";
pub const LOG_VERSION: u32 = 1;

pub fn architecture_for(plant: &str) -> Result<Architecture> {
    match plant {
        "uuv" => Ok(Uuv::architecture()),
        "mc" => Ok(MountainCar::architecture()),
        "integrator" => Ok(Integrator::architecture()),
        other => Err(Error::UnknownPlant(other.to_string())),
    }
}

/// Bundled seed controller for the plant, synthesized once with the default
/// options over the plant's standard initial box.
pub fn golden_controller(plant: &str) -> Result<MlpParams> {
    match plant {
        "uuv" => MlpParams::from_json(GOLDEN_UUV),
        "mc" => MlpParams::from_json(GOLDEN_MC),
        other => Err(Error::invalid("controller", format!("no bundled controller for plant `{other}`"))),
    }
}

/// Synthesizes a seed controller over the config's partition box.
pub fn synthesize_controller(cfg: &ExperimentConfig) -> Result<MlpParams> {
    let plant = plant_by_name(&cfg.plant)?;
    let formula = parse_formula(&cfg.formula, &plant.signature())?;
    synthesize_seed_controller(
        plant.as_ref(),
        &formula,
        &architecture_for(&cfg.plant)?,
        &cfg.partition.lower,
        &cfg.partition.upper,
        &cfg.synthesis.options(),
    )
}

pub fn load_controller(cfg: &ExperimentConfig) -> Result<MlpParams> {
    match cfg.controller.as_str() {
        "golden" => golden_controller(&cfg.plant),
        "synth" => synthesize_controller(cfg),
        _ => MlpParams::load(&cfg.controller_path().expect("path controller")),
    }
}

/// `--out` if given, else the config's `output`, else `out/<name>`.
pub fn output_dir(cfg: &ExperimentConfig, flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match &cfg.output {
        Some(p) => match &cfg.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.clone(),
        },
        None => PathBuf::from("out").join(cfg.label()),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record wall-clock timings into `timing.json` and the verification log.
    pub timing: bool,
}

pub struct RunOutput {
    pub dir: PathBuf,
    pub theta0: MlpParams,
    pub run: RepairRun,
    pub before: ClassificationSnapshot,
    pub after: ClassificationSnapshot,
}

/// Machine-readable failure description printed by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorRecord {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub message: String,
}

impl ErrorRecord {
    pub fn new(err: &Error) -> Self {
        Self { format: "isar-error".into(), version: 1, kind: err.kind().into(), message: err.to_string() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error record serializes")
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_jsonl<H: Serialize, T: Serialize>(path: &Path, header: &H, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    serde_json::to_writer(&mut buf, header)?;
    buf.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

#[derive(Serialize)]
struct LogHeader<'a> {
    format: &'a str,
    version: u32,
    plant: &'a str,
    method: &'a str,
}

#[derive(Serialize)]
struct PhaseRecord<'a> {
    phase: &'a str,
    #[serde(flatten)]
    record: &'a VerificationRecord,
}

fn snapshot(plant: &dyn Plant, state: &PartitionState) -> ClassificationSnapshot {
    let names = plant.state_names();
    let coords = plant.free_coords().iter().map(|&i| names[i].to_string()).collect();
    ClassificationSnapshot::new(plant.name(), coords, state.snapshot())
}

fn write_plot(path: &Path, snap: &ClassificationSnapshot) -> Result<()> {
    let mut buf = Vec::new();
    write_plot_data(snap, &mut buf)?;
    write_file(path, &buf)
}

/// Runs the configured method and writes every artifact into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path, opts: RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let plant = plant_by_name(&cfg.plant)?;
    let formula = parse_formula(&cfg.formula, &plant.signature())?;
    let p = &cfg.partition;
    let partition = Partition::new(&p.lower, &p.upper, &p.steps)?;
    let theta0 = load_controller(cfg)?;
    let method = cfg.method();
    let problem = RepairProblem::new(plant.as_ref(), &formula, partition.regions)?;
    let run = run_repair(&problem, &theta0, &cfg.repair_config(opts.timing), &method)?;

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let echo = ExperimentConfig { output: None, ..cfg.clone() };
    write_file(&out.join(CONFIG_FILE), echo.to_toml()?.as_bytes())?;
    write_file(&out.join(WEIGHTS_INITIAL_FILE), theta0.to_json()?.as_bytes())?;
    write_file(&out.join(WEIGHTS_FINAL_FILE), run.theta.to_json()?.as_bytes())?;

    let header = |format| LogHeader { format, version: LOG_VERSION, plant: plant.name(), method: method.name() };
    let phases: Vec<PhaseRecord> = run
        .verification_before
        .iter()
        .map(|record| PhaseRecord { phase: "before", record })
        .chain(run.verification_after.iter().map(|record| PhaseRecord { phase: "after", record }))
        .collect();
    write_jsonl(&out.join(VERIFICATION_LOG_FILE), &header(VERIFICATION_LOG_FORMAT), &phases)?;
    write_jsonl(&out.join(ITERATION_LOG_FILE), &header(ITERATION_LOG_FORMAT), &run.log)?;

    write_json(&out.join(REPORT_FILE), &run.report)?;
    write_file(&out.join(REPORT_TEXT_FILE), render_report(&run.report).as_bytes())?;

    let before = snapshot(plant.as_ref(), &run.initial);
    let after = snapshot(plant.as_ref(), &run.final_state);
    write_json(&out.join(REGIONS_BEFORE_FILE), &before)?;
    write_json(&out.join(REGIONS_AFTER_FILE), &after)?;
    write_plot(&out.join(PLOT_BEFORE_FILE), &before)?;
    write_plot(&out.join(PLOT_AFTER_FILE), &after)?;

    let timing_path = out.join(TIMING_FILE);
    match &run.timing {
        Some(t) => write_json(&timing_path, t)?,
        None if timing_path.exists() => fs::remove_file(&timing_path).map_err(|e| Error::io(&timing_path, e))?,
        None => {}
    }
    let stale = out.join(ERROR_FILE);
    if stale.exists() {
        fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
    }
    Ok(RunOutput { dir: out.to_path_buf(), theta0, run, before, after })
}

/// Loads a config file and runs it; `out` overrides the config's output directory.
pub fn run_config_file(path: &Path, out: Option<&Path>, opts: RunOptions) -> Result<RunOutput> {
    let cfg = ExperimentConfig::load(path)?;
    let dir = output_dir(&cfg, out);
    run(&cfg, &dir, opts)
}

/// Writes an error record into `dir`, creating it if needed.
pub fn write_error_record(dir: &Path, err: &Error) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join(ERROR_FILE))?;
    writeln!(f, "{}", ErrorRecord::new(err).to_json())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_controllers_match_synthesis() {
        for name in ["uuv-small", "mc-small"] {
            let mut cfg = preset(name).unwrap();
            let golden = load_controller(&cfg).unwrap();
            cfg.controller = "synth".into();
            let synth = load_controller(&cfg).unwrap();
            assert_eq!(golden.to_json().unwrap(), synth.to_json().unwrap(), "{name}");
        }
        assert!(golden_controller("integrator").is_err());
    }

    #[test]
    fn error_record_shape() {
        let rec = ErrorRecord::new(&Error::UnknownPlant("boat".into()));
        let v: serde_json::Value = serde_json::from_str(&rec.to_json()).unwrap();
        assert_eq!(v["format"], "isar-error");
        assert_eq!(v["kind"], "unknown_plant");
    }

    #[test]
    fn output_dir_precedence() {
        let mut cfg = preset("uuv-small").unwrap();
        assert_eq!(output_dir(&cfg, None), PathBuf::from("out/uuv-small"));
        cfg.output = Some("runs/a".into());
        cfg.base_dir = Some("/cfg".into());
        assert_eq!(output_dir(&cfg, None), PathBuf::from("/cfg/runs/a"));
        assert_eq!(output_dir(&cfg, Some(Path::new("x"))), PathBuf::from("x"));
    }
}
