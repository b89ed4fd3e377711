use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isar_core::experiment::{self, ErrorRecord, ExperimentConfig, MethodName, RunOptions};
use isar_core::{Error, Result};

#[derive(Parser)]
#[command(name = "isar", version, about = "Repair neural feedback controllers without breaking verified regions")]
struct Cli {
    /// Worker threads for all parallel work (default: logical CPU count).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Experiment config file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in config: uuv-small, mc-small, uuv-full or mc-full.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Artifact directory (default: the config's `output`, else out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock timings; the artifacts are then no longer reproducible.
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Grad,
    PlainSa,
}

#[derive(Subcommand)]
enum Command {
    /// Verify and sample every region without changing the controller.
    Verify(RunArgs),
    /// Repair failed regions while protecting verified ones.
    Repair(RunArgs),
    /// Run an unprotected or gradient-based baseline repair.
    Baseline {
        #[arg(long, value_enum)]
        method: Baseline,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run whatever method the config names.
    Run(RunArgs),
    /// Render a report.json as a table.
    Report { path: PathBuf },
    /// Convert a regions_*.json file into CSV plot data.
    PlotData {
        path: PathBuf,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a seed controller for the config's plant and box.
    Synthesize {
        #[command(flatten)]
        source: Source,
        /// Weight file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the resolved config as TOML.
    ShowConfig {
        #[command(flatten)]
        source: Source,
    },
}

fn load(source: &Source) -> Result<ExperimentConfig> {
    let mut cfg = match (&source.config, &source.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => experiment::preset(name)?,
        (None, None) => unreachable!("clap requires --config or --preset"),
    };
    if let Some(seed) = source.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_method(args: &RunArgs, method: Option<MethodName>, out_dir: &mut Option<PathBuf>) -> Result<()> {
    let mut cfg = load(&args.source)?;
    if let Some(m) = method {
        cfg.method = m;
    }
    let dir = experiment::output_dir(&cfg, args.out.as_deref());
    *out_dir = Some(dir.clone());
    let out = experiment::run(&cfg, &dir, RunOptions { timing: args.timing })?;
    print!("{}", experiment::render_report(&out.run.report));
    println!("artifacts: {}", dir.display());
    Ok(())
}

fn write_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = std::fs::File::create(p).map_err(|e| Error::Io { path: p.into(), source: e })?;
            f(&mut file)
        }
        None => f(&mut std::io::stdout().lock()),
    }
}

fn dispatch(cli: Cli, out_dir: &mut Option<PathBuf>) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Verify(args) => run_method(&args, Some(MethodName::VerifyOnly), out_dir),
        Command::Repair(args) => run_method(&args, Some(MethodName::Isar), out_dir),
        Command::Baseline { method, run } => {
            let m = match method {
                Baseline::Grad => MethodName::Grad,
                Baseline::PlainSa => MethodName::PlainSa,
            };
            run_method(&run, Some(m), out_dir)
        }
        Command::Run(args) => run_method(&args, None, out_dir),
        Command::Report { path } => {
            print!("{}", experiment::report_render(&path)?);
            Ok(())
        }
        Command::PlotData { path, out } => {
            write_output(out.as_deref(), |w| experiment::emit_plot_data(&path, w).map(|_| ()))
        }
        Command::Synthesize { source, out } => {
            let cfg = load(&source)?;
            let theta = experiment::synthesize_controller(&cfg)?;
            theta.save(&out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::ShowConfig { source } => {
            print!("{}", load(&source)?.to_toml()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out_dir = None;
    match dispatch(cli, &mut out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", ErrorRecord::new(&err).to_json());
            if let Some(dir) = out_dir {
                let _ = experiment::write_error_record(&dir, &err);
            }
            ExitCode::FAILURE
        }
    }
}
