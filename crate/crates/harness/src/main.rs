use std::path::PathBuf;
use std::process::ExitCode;

use cgpt_core::CgptMatrix;
use cgpt_harness::config::{load_config, ExperimentConfig, ExperimentId};
use cgpt_harness::error::{ConfigError, HarnessError};
use cgpt_harness::experiments::{
    msr_table, run_experiment, run_recon, run_tracking, simulate, tracking_cases, trajectory_table,
    RunReport, TrackingSpec,
};
use cgpt_harness::targets::load_target;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cgpt-track",
    version,
    about = "Simulate, reconstruct and track a small conductivity target from multistatic response data"
)]
struct Cli {
    /// JSON config; fields left out take the experiment defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Run a single seed instead of the configured list.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a ground-truth trajectory and its noisy MSR stream.
    Simulate {
        /// Ground-truth CGPT file (`{"K": k, "entries": [[...]]}`).
        #[arg(long, value_name = "PATH")]
        target: Option<PathBuf>,
    },
    /// Least-squares and Tikhonov reconstruction over the aperture sweep.
    Reconstruct {
        #[arg(long, value_name = "PATH")]
        target: Option<PathBuf>,
    },
    /// Eigenvalues and condition numbers of the MSR operator.
    Spectrum,
    /// Track the target with the EKF and write one file per run.
    Track {
        #[arg(long, value_name = "PATH")]
        target: Option<PathBuf>,
    },
    /// Run a named experiment: spectrum, recon-vs-aperture, track-fullview
    /// or track-limited.
    Experiment { id: ExperimentId },
}

impl Command {
    fn default_experiment(&self) -> ExperimentId {
        match self {
            Command::Simulate { .. } | Command::Track { .. } => ExperimentId::TrackFullview,
            Command::Reconstruct { .. } => ExperimentId::ReconVsAperture,
            Command::Spectrum => ExperimentId::Spectrum,
            Command::Experiment { id } => *id,
        }
    }

    fn accepts(&self, id: ExperimentId) -> bool {
        match self {
            Command::Simulate { .. } | Command::Track { .. } => {
                matches!(id, ExperimentId::TrackFullview | ExperimentId::TrackLimited)
            }
            _ => id == self.default_experiment(),
        }
    }

    fn target(&self) -> Option<&PathBuf> {
        match self {
            Command::Simulate { target }
            | Command::Reconstruct { target }
            | Command::Track { target } => target.as_ref(),
            _ => None,
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::defaults(cli.command.default_experiment()),
    };
    if !cli.command.accepts(cfg.experiment) {
        return Err(ConfigError::Invalid {
            field: "experiment".into(),
            message: format!(
                "config is for `{}`, which this command cannot run",
                cfg.experiment
            ),
        });
    }
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<RunReport, HarnessError> {
    let cfg = resolve_config(cli)?;
    let target: Option<CgptMatrix> = cli.command.target().map(|p| load_target(p)).transpose()?;
    match &cli.command {
        Command::Simulate { .. } => simulate_cmd(&cfg, target.as_ref()),
        Command::Reconstruct { .. } => run_recon(&cfg, target.as_ref()),
        Command::Track { .. } => run_tracking(&cfg, target.as_ref()),
        Command::Spectrum | Command::Experiment { .. } => run_experiment(&cfg),
    }
}

/// Trajectory and MSR stream of the first case for each seed.
fn simulate_cmd(
    cfg: &ExperimentConfig,
    target: Option<&CgptMatrix>,
) -> Result<RunReport, HarnessError> {
    let case = tracking_cases(cfg)
        .into_iter()
        .next()
        .ok_or_else(|| HarnessError::Runtime("no tracking case configured".into()))?;
    let spec = TrackingSpec::from_config(cfg, &case.layout, case.delta, case.noise, target)?;
    let mut report = RunReport::default();
    for &seed in &cfg.seeds {
        let sim = simulate(&spec, seed)?;
        let dtau = cfg.motion.dtau;
        let traj = cfg.output_dir.join(format!("trajectory_seed-{seed}.csv"));
        let msr = cfg
            .output_dir
            .join(format!("msr_{}_seed-{seed}.csv", case.label));
        trajectory_table(&sim.truth, dtau).write(&traj, cfg, &[seed])?;
        msr_table(&sim.frames, dtau).write(&msr, cfg, &[seed])?;
        report.artifacts.extend([traj, msr]);
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            if !cli.quiet {
                for path in &report.artifacts {
                    println!("wrote {}", path.display());
                }
            }
            for f in &report.failures {
                eprintln!("failed: {f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
