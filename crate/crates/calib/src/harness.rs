//! Experiment driver: synthetic-truth sanity checks and benchmark grids.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use abmcal_core::abm::{simulate, EpidemicSeries};
use abmcal_core::framework::{
    default_trainer, run_with, Evaluator, FrameworkConfig, RunOutput, RunResult, Sequential,
};
use abmcal_core::metrics::{mean, speedup, success_at};
use abmcal_core::rng::{derive_seed, stream};
use abmcal_core::space::ParameterVector;
use abmcal_core::strategies::StrategyKind;
use abmcal_core::surrogate::Family;

use crate::error::{Error, Result};
use crate::io::write_json;
use crate::parallel::Parallel;

/// Draws allowed before giving up on finding a non-degenerate truth.
pub const MAX_THETA_DRAWS: usize = 10_000;

/// Outcome of calibrating against a target generated from a known truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityReport {
    pub theta_star: ParameterVector,
    pub target_seed: u64,
    pub standardized_l2: f64,
    pub ksts: f64,
    pub surrogate_fits: usize,
    pub result: RunResult,
}

fn post_seed_infections(series: &EpidemicSeries) -> u64 {
    series.as_slice().iter().skip(1).sum()
}

/// Simulates `theta_star` with the run's simulation seed.
pub fn synthetic_target(theta_star: &[f64], config: &FrameworkConfig) -> Result<EpidemicSeries> {
    let config = config.resolved();
    if !config.space.contains(&ParameterVector(theta_star.to_vec())) {
        return Err(Error::Invalid("theta* lies outside the parameter space".into()));
    }
    let series = simulate(theta_star, &config.simulation, config.simulation_seed())?;
    if post_seed_infections(&series) == 0 {
        return Err(Error::Invalid(format!(
            "theta* {theta_star:?} infects nobody after day 0; the target would be degenerate"
        )));
    }
    Ok(series)
}

/// Calibrates against the synthetic target of `theta_star`; parameters not
/// listed in `config.calibrate` are pinned to their true values.
pub fn sanity_check(
    theta_star: &[f64],
    config: &FrameworkConfig,
    evaluator: &dyn Evaluator,
) -> Result<(SanityReport, RunOutput)> {
    let target = synthetic_target(theta_star, config)?;
    let mut config = config.clone();
    config.fixed = Some(ParameterVector(theta_star.to_vec()));
    let trainer = default_trainer(&config);
    let output = run_with(&config, &target, evaluator, trainer.as_ref())?;
    let result = output.result.clone();
    let report = SanityReport {
        theta_star: ParameterVector(theta_star.to_vec()),
        target_seed: config.simulation_seed(),
        standardized_l2: config.space.standardized_l2(&result.optimal, theta_star)?,
        ksts: result.optimal_ksts,
        surrogate_fits: output.surrogate_fits,
        result,
    };
    Ok((report, output))
}

/// Uniform truth whose target infects at least `initial_infected` agents
/// after day 0 under the run's simulation seed.
pub fn draw_theta_star(config: &FrameworkConfig, seed: u64) -> Result<ParameterVector> {
    let config = config.resolved();
    let mut rng = stream(seed);
    for _ in 0..MAX_THETA_DRAWS {
        let theta = config.space.sample_uniform(&mut rng);
        let series = simulate(&theta, &config.simulation, config.simulation_seed())?;
        if post_seed_infections(&series) >= config.simulation.initial_infected as u64 {
            return Ok(theta);
        }
    }
    Err(Error::Invalid(format!(
        "no non-degenerate truth found in {MAX_THETA_DRAWS} draws"
    )))
}

/// One strategy/surrogate pairing of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub strategy: StrategyKind,
    pub surrogate: Option<Family>,
}

impl Cell {
    fn key(&self) -> u64 {
        let strategy = StrategyKind::ALL.iter().position(|k| *k == self.strategy).unwrap_or(0) as u64;
        let family = self
            .surrogate
            .and_then(|f| Family::ALL.iter().position(|g| *g == f))
            .map_or(0, |i| i as u64 + 1);
        (strategy << 8) | family
    }

    pub fn surrogate_name(&self) -> &'static str {
        self.surrogate.map_or("-", |f| f.short_name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub n_repeats: usize,
    /// Numbers of calibrated parameters; `k` calibrates the first `k` in
    /// space order and pins the rest to the truth.
    pub dims_to_calibrate: Vec<usize>,
    pub strategies: Vec<StrategyKind>,
    /// Families paired with every surrogate-assisted strategy.
    pub surrogates: Vec<Family>,
    pub template: FrameworkConfig,
    pub success_levels: Vec<f64>,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n_repeats: 20,
            dims_to_calibrate: (1..=7).collect(),
            strategies: StrategyKind::ALL.to_vec(),
            surrogates: Family::ALL.to_vec(),
            template: FrameworkConfig::default(),
            success_levels: vec![0.98, 0.99],
            seed: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_repeats == 0 {
            return Err(Error::Invalid("n_repeats must be at least 1".into()));
        }
        if self.strategies.is_empty() || self.dims_to_calibrate.is_empty() {
            return Err(Error::Invalid("the grid is empty".into()));
        }
        let dim = self.template.space.dim();
        if let Some(k) = self.dims_to_calibrate.iter().find(|&&k| k == 0 || k > dim) {
            return Err(Error::Invalid(format!("cannot calibrate {k} of {dim} parameters")));
        }
        let surrogate_assisted = self.strategies.iter().any(|s| s.surrogate_mode().is_some());
        if surrogate_assisted && self.surrogates.is_empty() {
            return Err(Error::Invalid("surrogate-assisted strategies need at least one family".into()));
        }
        if let Some(l) = self.success_levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::Invalid(format!("success level {l} outside (0, 1)")));
        }
        self.template.validate()?;
        Ok(())
    }

    /// Grid cells, the random baseline first.
    pub fn cells(&self) -> Vec<Cell> {
        let mut kinds = vec![StrategyKind::RandomBaseline];
        kinds.extend(self.strategies.iter().filter(|k| **k != StrategyKind::RandomBaseline));
        kinds.dedup();
        let mut cells = Vec::new();
        for kind in kinds {
            if kind.surrogate_mode().is_none() {
                cells.push(Cell {
                    strategy: kind,
                    surrogate: None,
                });
            } else {
                cells.extend(self.surrogates.iter().map(|&f| Cell {
                    strategy: kind,
                    surrogate: Some(f),
                }));
            }
        }
        cells
    }

    fn config_for(&self, cell: Cell, dims: usize, seed: u64) -> FrameworkConfig {
        let mut config = self.template.clone();
        config.strategy.kind = cell.strategy;
        config.surrogate = cell.surrogate;
        config.calibrate = Some(
            config.space.specs()[..dims].iter().map(|s| s.name.clone()).collect(),
        );
        config.seed = seed;
        config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub seed: u64,
    pub theta_star: ParameterVector,
    pub standardized_l2: f64,
    pub result: RunResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub strategy: StrategyKind,
    pub surrogate: Option<Family>,
    pub dims: usize,
    pub mean_standardized_l2: Option<f64>,
    pub mean_ksts: Option<f64>,
    /// One entry per success level.
    pub success: Vec<Option<f64>>,
    /// Against the random baseline, one entry per success level; `None`
    /// when the baseline never reached the level.
    pub speedup: Vec<Option<f64>>,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<String>,
}

impl CellReport {
    pub fn cell(&self) -> Cell {
        Cell {
            strategy: self.strategy,
            surrogate: self.surrogate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub success_levels: Vec<f64>,
    pub dims: Vec<usize>,
    pub n_repeats: usize,
    pub cells: Vec<CellReport>,
}

impl BenchmarkReport {
    pub fn find(&self, cell: Cell, dims: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.cell() == cell && c.dims == dims)
    }
}

struct Job {
    cell: Cell,
    dims: usize,
    repeat: usize,
}

/// Seed of one run: independent per cell, dimension count and repeat.
pub fn run_seed(spec_seed: u64, cell: Cell, dims: usize, repeat: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(spec_seed, cell.key()), dims as u64), repeat as u64)
}

/// Truth shared by every cell for one dimension count and repeat.
pub fn repeat_truth(spec: &ExperimentSpec, dims: usize, repeat: usize) -> Result<ParameterVector> {
    let seed = derive_seed(derive_seed(spec.seed ^ 0x7E57, dims as u64), repeat as u64);
    let mut config = spec.template.clone();
    config.seed = seed;
    draw_theta_star(&config, seed)
}

/// Runs the whole grid; failed runs are recorded in their cell.
pub fn run_benchmark(spec: &ExperimentSpec, pool: &Parallel) -> Result<BenchmarkReport> {
    spec.validate()?;
    let cells = spec.cells();
    let truths = pool.install(|| {
        spec.dims_to_calibrate
            .par_iter()
            .flat_map_iter(|&k| (0..spec.n_repeats).map(move |r| (k, r)))
            .map(|(k, r)| repeat_truth(spec, k, r).map(|t| ((k, r), t)))
            .collect::<Result<std::collections::BTreeMap<_, _>>>()
    })?;
    let jobs: Vec<Job> = spec
        .dims_to_calibrate
        .iter()
        .flat_map(|&dims| {
            cells.iter().flat_map(move |&cell| (0..spec.n_repeats).map(move |repeat| Job { cell, dims, repeat }))
        })
        .collect();
    let outcomes: Vec<std::result::Result<RunRecord, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let seed = run_seed(spec.seed, job.cell, job.dims, job.repeat);
                let config = spec.config_for(job.cell, job.dims, seed);
                let theta = &truths[&(job.dims, job.repeat)];
                sanity_check(theta, &config, &Sequential)
                    .map(|(report, _)| RunRecord {
                        repeat: job.repeat,
                        seed,
                        theta_star: theta.clone(),
                        standardized_l2: report.standardized_l2,
                        result: report.result,
                    })
                    .map_err(|e| format!("repeat {}: {e}", job.repeat))
            })
            .collect()
    });

    let mut reports = Vec::new();
    let mut outcomes = outcomes.into_iter();
    for &dims in &spec.dims_to_calibrate {
        for &cell in &cells {
            let mut runs = Vec::new();
            let mut failures = Vec::new();
            for outcome in outcomes.by_ref().take(spec.n_repeats) {
                match outcome {
                    Ok(r) => runs.push(r),
                    Err(e) => failures.push(e),
                }
            }
            reports.push(CellReport {
                strategy: cell.strategy,
                surrogate: cell.surrogate,
                dims,
                mean_standardized_l2: mean(&runs.iter().map(|r| r.standardized_l2).collect::<Vec<_>>()),
                mean_ksts: mean(&runs.iter().map(|r| r.result.optimal_ksts).collect::<Vec<_>>()),
                success: Vec::new(),
                speedup: Vec::new(),
                runs,
                failures,
            });
        }
    }
    for i in 0..reports.len() {
        let baseline: Vec<RunResult> = reports
            .iter()
            .find(|c| c.dims == reports[i].dims && c.strategy == StrategyKind::RandomBaseline)
            .map(|c| c.runs.iter().map(|r| r.result.clone()).collect())
            .unwrap_or_default();
        let own: Vec<RunResult> = reports[i].runs.iter().map(|r| r.result.clone()).collect();
        let mut success = Vec::new();
        let mut speedups = Vec::new();
        for &level in &spec.success_levels {
            success.push(if own.is_empty() { None } else { Some(success_at(&own, level)?) });
            speedups.push(if own.is_empty() || baseline.is_empty() {
                None
            } else {
                speedup(&own, &baseline, level)?
            });
        }
        reports[i].success = success;
        reports[i].speedup = speedups;
    }
    Ok(BenchmarkReport {
        success_levels: spec.success_levels.clone(),
        dims: spec.dims_to_calibrate.clone(),
        n_repeats: spec.n_repeats,
        cells: reports,
    })
}

fn fixed(value: Option<f64>, decimals: usize) -> String {
    value.map_or_else(|| "N/A".into(), |v| format!("{v:.decimals$}"))
}

fn percent(level: f64) -> String {
    format!("{}%", (level * 100.0).round())
}

/// Writes `report.json` and the three summary tables into `dir`.
pub fn write_report(dir: &Path, report: &BenchmarkReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_json(&dir.join("report.json"), report)?;

    let mut cells: Vec<Cell> = Vec::new();
    for c in &report.cells {
        if !cells.contains(&c.cell()) {
            cells.push(c.cell());
        }
    }
    let per_dims = |name: &str, metric: &dyn Fn(&CellReport) -> Option<f64>| -> Result<()> {
        let path = dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(Error::csv(&path))?;
        let mut header = vec!["strategy".to_string(), "surrogate".to_string()];
        header.extend(report.dims.iter().map(usize::to_string));
        w.write_record(&header).map_err(Error::csv(&path))?;
        for cell in &cells {
            let mut row = vec![cell.strategy.name().to_string(), cell.surrogate_name().to_string()];
            row.extend(report.dims.iter().map(|&k| fixed(report.find(*cell, k).and_then(metric), 4)));
            w.write_record(&row).map_err(Error::csv(&path))?;
        }
        w.flush().map_err(Error::io(&path))
    };
    per_dims("table_standardized_l2.csv", &|c| c.mean_standardized_l2)?;
    per_dims("table_ksts.csv", &|c| c.mean_ksts)?;

    let path = dir.join("table_success_speedup.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::csv(&path))?;
    let mut header = vec!["strategy".to_string(), "surrogate".to_string(), "parameters".to_string()];
    header.extend(report.success_levels.iter().map(|l| format!("success@{}", percent(*l))));
    header.extend(report.success_levels.iter().map(|l| format!("speedup@{}", percent(*l))));
    w.write_record(&header).map_err(Error::csv(&path))?;
    for c in &report.cells {
        let mut row = vec![
            c.strategy.name().to_string(),
            c.cell().surrogate_name().to_string(),
            c.dims.to_string(),
        ];
        row.extend(c.success.iter().map(|s| fixed(*s, 2)));
        row.extend(c.speedup.iter().map(|s| fixed(*s, 2)));
        w.write_record(&row).map_err(Error::csv(&path))?;
    }
    w.flush().map_err(Error::io(&path))
}

