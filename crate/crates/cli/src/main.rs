use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use yf_cli::config::{Backend, ExperimentConfig};
use yf_cli::report::Report;
use yf_cli::run::{self, RunError};

/// Perturbative Wightman functions on a perturbed lattice.
#[derive(Debug, Parser)]
#[command(name = "yf", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.backend`.
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// JSON report path; overrides `run.output`. Stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the checks as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Truncated Wightman functions from the `[wightman]` section.
    Wightman {
        #[command(flatten)]
        common: Common,
        /// Write the propagator tables to this directory.
        #[arg(long)]
        dump_propagators: Option<PathBuf>,
    },
    /// Identity suite.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruction round trips and the scattering chain.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// JSON amplitude file to round-trip.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Four-point out-field amplitude on the perturbed background.
    DemoNonquasifree {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, RunError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(b) = common.backend {
        cfg.run.backend = b;
    }
    Ok(cfg)
}

fn emit(report: &Report, cfg: &ExperimentConfig, common: &Common) -> Result<(), RunError> {
    let json = report.to_json();
    match common.out.as_deref().or(cfg.run.output.as_deref()) {
        Some(path) => std::fs::write(path, json)?,
        None => print!("{json}"),
    }
    if let Some(path) = &common.csv {
        let csv = report.checks_csv().map_err(|e| RunError::Io(std::io::Error::other(e)))?;
        std::fs::write(path, csv)?;
    }
    for c in &report.checks {
        eprintln!("{}", c.summary());
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool, RunError> {
    let (common, report) = match &cli.command {
        Command::Wightman { common, dump_propagators } => {
            let cfg = load(common)?;
            let r = run::wightman(&cfg, dump_propagators.as_deref().map(Path::new))?;
            (common, (cfg, r))
        }
        Command::Check { common } => {
            let cfg = load(common)?;
            let r = run::check(&cfg)?;
            (common, (cfg, r))
        }
        Command::Reconstruct { common, state } => {
            let cfg = load(common)?;
            let r = run::reconstruct(&cfg, state.as_deref())?;
            (common, (cfg, r))
        }
        Command::DemoNonquasifree { common } => {
            let cfg = load(common)?;
            let r = run::demo_nonquasifree(&cfg)?;
            (common, (cfg, r))
        }
    };
    let (cfg, report) = report;
    emit(&report, &cfg, common)?;
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
