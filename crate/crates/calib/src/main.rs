use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use abmcal::harness::{run_benchmark, sanity_check, write_report, ExperimentSpec};
use abmcal::ingest::{ingest_file, parse_iso_date};
use abmcal::io::{read_config, read_json, read_series, write_cumulative, write_db, write_json, write_series};
use abmcal::parallel::Parallel;
use abmcal_core::abm::{simulate, SimulationConfig};
use abmcal_core::framework::{default_trainer, run_with, FrameworkConfig};
use abmcal_core::ks::to_cdf;

/// Calibrate an agent-based SIR model against an observed infection series.
#[derive(Debug, Parser)]
#[command(name = "abmcal", version)]
struct Cli {
    /// Maximum number of concurrent simulations (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the model once and write its daily new infections.
    Simulate(SimulateArgs),
    /// Calibrate against a target series.
    Calibrate(CalibrateArgs),
    /// Calibrate against a synthetic target generated from known parameters.
    SanityCheck(SanityArgs),
    /// Extract a smoothed daily series from a cumulative confirmed-cases table.
    Ingest(IngestArgs),
    /// Run an experiment grid and write the report tables.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Seven comma-separated parameter values.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    params: Vec<f64>,
    #[arg(long)]
    days: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SimulationConfig::default().population)]
    population: usize,
    #[arg(long, default_value_t = SimulationConfig::default().initial_infected)]
    initial_infected: usize,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Target series CSV (`day,new_infections`).
    #[arg(long)]
    target: PathBuf,
    /// Result JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write the ground-truth database as CSV.
    #[arg(long)]
    db: Option<PathBuf>,
    /// Also write `actual.csv` and `simulated.csv` scaled cumulative curves
    /// into this directory.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SanityArgs {
    #[arg(long)]
    config: PathBuf,
    /// Seven comma-separated true parameter values.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    theta_star: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    db: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    csv: PathBuf,
    /// Country/Region value; provinces are summed.
    #[arg(long)]
    region: String,
    /// First day, YYYY-MM-DD.
    #[arg(long)]
    from: String,
    /// Last day (inclusive), YYYY-MM-DD.
    #[arg(long)]
    to: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Experiment specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for the report.
    #[arg(long)]
    out: PathBuf,
}

fn log_config(config: &FrameworkConfig) -> anyhow::Result<()> {
    info!("resolved config: {}", serde_json::to_string(&config.resolved())?);
    Ok(())
}

fn seven(values: &[f64], flag: &str) -> anyhow::Result<()> {
    if values.len() != 7 {
        bail!("{flag} needs 7 comma-separated values, got {}", values.len());
    }
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let pool = Parallel::new(cli.jobs)?;
    match cli.command {
        Command::Simulate(a) => {
            seven(&a.params, "--params")?;
            let config = SimulationConfig {
                population: a.population,
                initial_infected: a.initial_infected,
                days: a.days,
                ..SimulationConfig::default()
            };
            info!("simulate: params {:?}, config {config:?}, seed {}", a.params, a.seed);
            let series = simulate(&a.params, &config, a.seed)?;
            write_series(&a.out, &series)?;
        }
        Command::Calibrate(a) => {
            let mut config = read_config(&a.config)?;
            let target = read_series(&a.target)?;
            config.simulation.days = target.days();
            log_config(&config)?;
            let trainer = default_trainer(&config);
            let output = run_with(&config, &target, &pool, trainer.as_ref())?;
            write_json(&a.out, &output.result)?;
            if let Some(path) = &a.db {
                write_db(path, &output.db)?;
            }
            if let Some(dir) = &a.curves {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let best = output.db.best()?;
                let simulated = simulate(&best.params, &config.resolved().simulation, best.seed)?;
                write_cumulative(&dir.join("actual.csv"), &to_cdf(&target))?;
                write_cumulative(&dir.join("simulated.csv"), &to_cdf(&simulated))?;
            }
            info!(
                "optimal ksts {} after {} evaluations ({:?})",
                output.result.optimal_ksts, output.result.evaluations_used, output.result.stop_reason
            );
        }
        Command::SanityCheck(a) => {
            seven(&a.theta_star, "--theta-star")?;
            let config = read_config(&a.config)?;
            log_config(&config)?;
            let (report, output) = sanity_check(&a.theta_star, &config, &pool)?;
            write_json(&a.out, &report)?;
            if let Some(path) = &a.db {
                write_db(path, &output.db)?;
            }
            info!("standardized L2 {} with ksts {}", report.standardized_l2, report.ksts);
        }
        Command::Ingest(a) => {
            let from = parse_iso_date(&a.from)?;
            let to = parse_iso_date(&a.to)?;
            let series = ingest_file(&a.csv, &a.region, from, to)?;
            info!("ingested {} days for {}", series.days(), a.region);
            write_series(&a.out, &series)?;
        }
        Command::Benchmark(a) => {
            let spec: ExperimentSpec = read_json(&a.spec)?;
            info!("resolved spec: {}", serde_json::to_string(&spec)?);
            let report = run_benchmark(&spec, &pool)?;
            write_report(&a.out, &report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
