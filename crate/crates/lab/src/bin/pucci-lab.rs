//! Command-line front end: one subcommand per study.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pucci_lab::config::{ScenarioConfig, ScenarioKind};
use pucci_lab::report::write_report;
use pucci_lab::scenarios::run;
use pucci_lab::LabError;

#[derive(Debug, Parser)]
#[command(name = "pucci-lab", version, about = "Regularity studies for Pucci-class parabolic equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `output_dir`, then `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand, Clone, Copy)]
enum Command {
    /// Solve the configured Dirichlet problem.
    Solve,
    /// Check discrete class membership.
    Check,
    /// Interior decay sequences at configured and sampled points.
    Decay,
    /// Boundary decay on a half-space lattice.
    Boundary,
    /// The Hessian-jump class member.
    Counterexample,
    /// Sweep the p-Laplace exponent.
    SweepP,
    /// Sweep the ellipticity ratio.
    SweepEllipticity,
    /// Regularization continuation.
    EpsContinuation,
}

impl Command {
    fn kind(self) -> ScenarioKind {
        match self {
            Command::Solve => ScenarioKind::Solve,
            Command::Check => ScenarioKind::ClassCheck,
            Command::Decay => ScenarioKind::Decay,
            Command::Boundary => ScenarioKind::Boundary,
            Command::Counterexample => ScenarioKind::Counterexample,
            Command::SweepP => ScenarioKind::PSweep,
            Command::SweepEllipticity => ScenarioKind::EllipticitySweep,
            Command::EpsContinuation => ScenarioKind::EpsSweep,
        }
    }
}

fn execute(cli: &Cli) -> Result<(), LabError> {
    let path = cli.config.as_ref().ok_or_else(|| LabError::invalid("--config PATH is required"))?;
    let cfg = ScenarioConfig::load(path)?;
    let out = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let report = run(cli.command.kind(), &cfg)?;
    for file in write_report(&report, &cfg, &out)? {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn init(cli: &Cli) -> anyhow::Result<()> {
    let level = if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().context("configuring the thread pool")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init(&cli) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
