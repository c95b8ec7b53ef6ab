use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cgo_lab::cache::Cache;
use cgo_lab::report::emit_report;
use cgo_lab::runner::{run_scenario, RunOptions};
use cgo_lab::scenario::{Pipeline, Scenario};

#[derive(Parser)]
#[command(name = "cgo-lab", version, about = "CGO / partial-data Calderón numerical lab on the unit disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Carleman-estimate sweep and weighted solver
    Carleman(Common),
    /// Cauchy operators, decay suite and CGO residual sweep
    Cgo(Common),
    /// Identity coefficients, stationary phase and probe derivative
    Probe(Common),
    /// Dirichlet-to-Neumann matrices
    Dnmap(Common),
    /// Cauchy-data completion on the missing arcs
    Complete(Common),
    /// Critical points and boundary classification of a phase
    Phase(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; the pipeline's defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Artifact cache directory (disabled when omitted)
    #[arg(long)]
    cache: Option<PathBuf>,
}

fn run(pipeline: Pipeline, args: &Common) -> cgo_lab::Result<bool> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| cgo_lab::LabError::ConfigError(e.to_string()))?;
    }
    let mut scenario = match &args.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::minimal(pipeline.name(), pipeline),
    };
    match scenario.pipeline {
        None => scenario.pipeline = Some(pipeline),
        Some(p) if p != pipeline => {
            return Err(cgo_lab::LabError::ConfigError(format!(
                "scenario '{}' is a {} scenario, not {}",
                scenario.name,
                p.name(),
                pipeline.name()
            )))
        }
        _ => {}
    }
    let cache = match &args.cache {
        Some(d) => Cache::at(d)?,
        None => Cache::disabled(),
    };
    let report = run_scenario(&scenario, &RunOptions { cache })?;
    let out = match &scenario.output {
        Some(sub) => args.out.join(sub),
        None => args.out.clone(),
    };
    emit_report(&report, &out)?;
    for c in &report.checks {
        let id = c.criterion.map(|n| format!("[{n}] ")).unwrap_or_default();
        println!("{} {id}{}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("summary: {}", out.join("summary.json").display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (pipeline, args) = match &cli.command {
        Command::Carleman(a) => (Pipeline::Carleman, a),
        Command::Cgo(a) => (Pipeline::Cgo, a),
        Command::Probe(a) => (Pipeline::Probe, a),
        Command::Dnmap(a) => (Pipeline::Dnmap, a),
        Command::Complete(a) => (Pipeline::Complete, a),
        Command::Phase(a) => (Pipeline::Phase, a),
    };
    match run(pipeline, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
