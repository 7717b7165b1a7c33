//! Config-driven experiment runner behind the `meshft` binary.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;

/// Failure classes, each with its own exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Invalid or unreadable config, flags or inputs (exit 2).
    Config(String),
    /// Non-finite states, gradients or metrics (exit 3).
    Numeric(String),
    /// `--check` thresholds not met (exit 4).
    Check(Vec<String>),
    /// Output could not be written (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Check(_) => 4,
        }
    }

    /// Wraps a core error with the stage it came from.
    pub fn stage(stage: &str, e: meshft::Error) -> Self {
        use meshft::Error as E;
        let msg = format!("{stage}: {e}");
        match e {
            E::NonFiniteState { .. }
            | E::NonFiniteGradient
            | E::Diverged { .. }
            | E::ZeroModeAmplitude
            | E::ZeroEnergy
            | E::ZeroField
            | E::SingularFit => CliError::Numeric(msg),
            E::Serde(_) => CliError::Io(msg),
            _ => CliError::Config(msg),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Check(fails) => write!(f, "check failed: {}", fails.join("; ")),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "meshft", version, about = "Structure-preserving wave learning on oriented meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Overrides the CFL target.
    #[arg(long, global = true, value_name = "X")]
    pub cfl: Option<f64>,
    /// Overrides the mesh, `grid:NX,NY` or `delaunay:N,SEED`.
    #[arg(long, global = true, value_name = "SPEC")]
    pub mesh: Option<String>,
    /// Also write the rolled-out states.
    #[arg(long, global = true)]
    pub dump_states: bool,
    /// Exit with status 4 when metrics miss the configured thresholds.
    #[arg(long, global = true)]
    pub check: bool,
    /// Checkpoint to read; defaults to `<out>/checkpoint.json`.
    #[arg(long, global = true, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate training and validation pairs.
    Gen,
    /// Train a model and write a checkpoint.
    Train,
    /// Roll out a checkpoint against exact plane waves.
    Rollout,
    /// Physics diagnostics of one trajectory.
    Diagnose {
        /// Trajectory dump from `rollout --dump-states`; otherwise the
        /// checkpoint is rolled out on the first evaluation wave.
        #[arg(long, value_name = "PATH")]
        trajectory: Option<PathBuf>,
    },
    /// Train every structural ablation and compare them.
    Ablate,
    /// Evaluate a checkpoint under distribution shifts.
    Ood,
    /// Train on growing dataset sizes.
    Sweep {
        /// Comma-separated training-set sizes.
        #[arg(long, value_delimiter = ',', value_name = "N,N,...")]
        sizes: Option<Vec<usize>>,
    },
    /// Discrete Maxwell demo with randomized material stars.
    MaxwellDemo,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Train => "train",
            Command::Rollout => "rollout",
            Command::Diagnose { .. } => "diagnose",
            Command::Ablate => "ablate",
            Command::Ood => "ood",
            Command::Sweep { .. } => "sweep",
            Command::MaxwellDemo => "maxwell-demo",
        }
    }
}

/// Config file plus command-line overrides, validated.
pub fn resolve_config(common: &CommonArgs, command: &Command) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let maxwell = matches!(command, Command::MaxwellDemo);
    if let Some(c) = common.cfl {
        *(if maxwell { &mut cfg.maxwell.cfl } else { &mut cfg.cfl }) = c;
    }
    if let Some(m) = &common.mesh {
        let spec = m.parse().map_err(|e| CliError::Config(format!("--mesh: {e}")))?;
        *(if maxwell { &mut cfg.maxwell.mesh } else { &mut cfg.mesh }) = spec;
    }
    if let Command::Sweep { sizes: Some(s) } = command {
        cfg.sweep.sizes = s.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.common, &cli.command)?;
    commands::execute(&cli.command, &cli.common, &cfg)
}
