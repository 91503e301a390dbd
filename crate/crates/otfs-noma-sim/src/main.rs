use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use otfs_noma_sim::config::{self, ExperimentSpec};
use otfs_noma_sim::experiment;
use otfs_noma_sim::output::OutputFormat;

/// Link-level OTFS-NOMA outage experiments driven by a TOML config.
#[derive(Debug, Parser)]
#[command(name = "simulate", version, about)]
struct Cli {
    /// Experiment configuration file (an empty file runs the reference
    /// scenario).
    #[arg(long)]
    config: PathBuf,

    /// Worker threads for trial execution (overrides SIMULATE_WORKERS and
    /// the config; default: all cores).
    #[arg(long)]
    workers: Option<usize>,

    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output format: csv or json (overrides the config).
    #[arg(long)]
    format: Option<String>,

    /// Output file path (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also run the TDMA baseline on the same channel draws.
    #[arg(long)]
    baseline: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    let mut spec: ExperimentSpec =
        config::parse_config(&cli.config).map_err(|e| e.to_string())?;

    if let Some(seed) = cli.seed {
        spec.scenario.seed = seed;
    }
    if let Some(format) = &cli.format {
        spec.output.format = OutputFormat::parse(format)
            .ok_or_else(|| format!("--format: expected csv or json, got {format:?}"))?;
    }
    if let Some(out) = cli.out {
        spec.output.path = out;
    }
    if cli.baseline {
        spec.output.baseline = true;
    }

    let workers = cli
        .workers
        .or_else(|| {
            std::env::var("SIMULATE_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .or(spec.workers);
    if let Some(workers) = workers {
        if workers == 0 {
            return Err("worker count must be at least 1".to_string());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| e.to_string())?;
    }

    let summary = experiment::run_experiment(&spec).map_err(|e| e.to_string())?;
    eprintln!(
        "wrote {} rows to {}",
        summary.rows.len(),
        summary.path.display()
    );
    Ok(())
}
