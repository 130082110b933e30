#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hnn_core::HnnError;

mod commands;
mod config;

use config::Config;

#[derive(Parser, Debug)]
#[command(name = "hnn", version, about = "Generate data, train neural Hamiltonians, simulate and bound them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run seed (data, initialization, batch order).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for every output file and default inputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// TOML file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Reference system (mass_spring, double_pendulum, kdv_semidiscrete,
    /// harmonic_oscillator).
    #[arg(long, global = true)]
    system: Option<String>,
    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a reference system and write a gradient dataset.
    Generate {
        #[arg(long)]
        n_traj: Option<usize>,
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Fit a model to a dataset.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// naive_hnn | transformed | neural_ode
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Integrate a trained model or the reference system.
    Simulate {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Simulate the reference system instead of a model.
        #[arg(long)]
        true_system: bool,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Evaluate the generalization / sup-norm / KAM bound chain for a model.
    Bounds {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Energy drift, recurrence, gradient error or value error.
    Diagnose {
        /// energy_drift | recurrence | gradient_error | value_error
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Render CSV series as SVG line charts.
    Plot { files: Vec<PathBuf> },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<HnnError> for CliError {
    fn from(e: HnnError) -> Self {
        let msg = e.to_string();
        if e.is_numerical() {
            return CliError::Numerical(msg);
        }
        match e {
            HnnError::Io(_) | HnnError::Json(_) | HnnError::Format(_) => CliError::Io(msg),
            _ => CliError::Config(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn build_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = &cli.system {
        cfg.system.name = s.clone();
    }
    match &cli.command {
        Command::Generate { n_traj, n_points } => {
            cfg.data.n_traj = n_traj.or(cfg.data.n_traj);
            cfg.data.n_points = n_points.or(cfg.data.n_points);
        }
        Command::Train { model, iterations, .. } => {
            if let Some(m) = model {
                cfg.model.kind = Some(m.clone());
            }
            cfg.train.iterations = iterations.or(cfg.train.iterations);
        }
        Command::Simulate { true_system, t_end, dt, .. } => {
            if *true_system {
                cfg.simulate.source = Some("system".into());
            }
            if let Some(t1) = t_end {
                let t0 = cfg.simulate.t_span.map_or(0.0, |s| s[0]);
                cfg.simulate.t_span = Some([t0, *t1]);
            }
            cfg.simulate.dt = dt.or(cfg.simulate.dt);
        }
        Command::Diagnose { kind: Some(k), .. } => cfg.diagnose.kind = k.clone(),
        _ => {}
    }
    cfg.resolve()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = build_config(&cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", cli.out_dir.display())))?;
    let ctx = commands::Context {
        cfg,
        out_dir: cli.out_dir.clone(),
    };
    match cli.command {
        Command::Generate { .. } => commands::generate(&ctx),
        Command::Train { dataset, .. } => commands::train(&ctx, dataset),
        Command::Simulate { model, .. } => commands::simulate(&ctx, model),
        Command::Bounds { model, dataset } => commands::bounds(&ctx, model, dataset),
        Command::Diagnose {
            trajectory,
            model,
            dataset,
            ..
        } => commands::diagnose(&ctx, trajectory, model, dataset),
        Command::Plot { files } => commands::plot(&ctx, files),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hnn: {e}");
            ExitCode::from(e.code())
        }
    }
}
