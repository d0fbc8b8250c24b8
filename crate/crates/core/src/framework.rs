//! The iterative calibration loop.
//!
//! A run exhausts the minimum budget with a plain sampler, then alternates
//! surrogate maintenance and strategy batches until the KS threshold or the
//! maximum budget is reached. Every evaluated candidate lands in an
//! append-only ground-truth database.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::abm::{simulate, EpidemicSeries, SimulationConfig};
use crate::error::{check_dim, Error, Result};
use crate::ks::{compare, to_cdf, CumulativeDistribution, Label};
use crate::rng::{derive_seed, stream, Stream};
use crate::space::{ParameterSpace, ParameterVector};
use crate::strategies::{
    phi, sa_sampler_batch, Budget, CmaEs, Perturbation, ResponseSurfaceSearch, Sampler, StrategyConfig,
    StrategyKind,
};
use crate::surrogate::{
    BestOfFamilies, ConfidenceCriteria, Family, FamilyTrainer, Mode, Surrogate, SurrogateTrainer, TrainingSet,
};

const SIMULATION_STREAM: u64 = 0xAB;
const STRATEGY_STREAM: u64 = 0x57;
const TRAINER_STREAM: u64 = 0x7A;

/// Folds used when cross-validating classifiers.
pub const CLASSIFIER_FOLDS: usize = 3;

/// How ABM seeds are assigned to candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Every candidate of a run is simulated with the same seed.
    #[default]
    Common,
    /// Each row draws its own seed from the run seed and its row index.
    PerCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameworkConfig {
    pub abm_min_budget: usize,
    pub abm_max_budget: usize,
    pub batch_size: usize,
    pub ks_threshold: f64,
    pub f1_threshold: f64,
    pub rmse_threshold: f64,
    pub alpha: f64,
    pub strategy: StrategyConfig,
    /// Surrogate family; `None` picks the best family by cross-validation.
    pub surrogate: Option<Family>,
    pub simulation: SimulationConfig,
    pub seed: u64,
    pub seed_policy: SeedPolicy,
    pub space: ParameterSpace,
    /// Names of the calibrated parameters; `None` calibrates all of them.
    pub calibrate: Option<Vec<String>>,
    /// Values for the parameters that are not calibrated; defaults to the
    /// centre of the space.
    pub fixed: Option<ParameterVector>,
}

impl Default for FrameworkConfig {
    fn default() -> Self {
        Self {
            abm_min_budget: 500,
            abm_max_budget: 2500,
            batch_size: 250,
            ks_threshold: 0.005,
            f1_threshold: 0.90,
            rmse_threshold: 0.001,
            alpha: 0.05,
            strategy: StrategyConfig::default(),
            surrogate: None,
            simulation: SimulationConfig::default(),
            seed: 0,
            seed_policy: SeedPolicy::default(),
            space: ParameterSpace::epidemic(),
            calibrate: None,
            fixed: None,
        }
    }
}

impl FrameworkConfig {
    /// Copies the framework-level batch size, F1 threshold and alpha into the
    /// nested strategy and simulation sections, which they override.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.strategy.batch_size = c.batch_size;
        c.strategy.f1_threshold = c.f1_threshold;
        c.simulation.alpha = c.alpha;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.abm_min_budget == 0 || self.abm_min_budget > self.abm_max_budget {
            return Err(Error::Config(alloc::format!(
                "need 0 < abm_min_budget ({}) <= abm_max_budget ({})",
                self.abm_min_budget,
                self.abm_max_budget
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.ks_threshold > 0.0 && self.f1_threshold > 0.0 && self.rmse_threshold > 0.0) {
            return Err(Error::Config("thresholds must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Alpha(self.alpha));
        }
        self.strategy.validate()?;
        self.simulation.validate()?;
        check_dim(crate::abm::EpidemicParams::DIM, self.space.dim())?;
        if let Some(fixed) = &self.fixed {
            check_dim(self.space.dim(), fixed.len())?;
            if !self.space.contains(fixed) {
                return Err(Error::Config("fixed parameter values lie outside the space".into()));
            }
        }
        self.free_indices()?;
        Ok(())
    }

    /// Indices of the calibrated coordinates, in space order.
    pub fn free_indices(&self) -> Result<Vec<usize>> {
        let Some(names) = &self.calibrate else {
            return Ok((0..self.space.dim()).collect());
        };
        if names.is_empty() {
            return Err(Error::Config("calibrate lists no parameters".into()));
        }
        let mut indices = names
            .iter()
            .map(|n| {
                self.space
                    .index_of(n)
                    .ok_or_else(|| Error::Config(alloc::format!("unknown parameter {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        indices.sort_unstable();
        let before = indices.len();
        indices.dedup();
        if indices.len() != before {
            return Err(Error::Config("calibrate lists a parameter twice".into()));
        }
        Ok(indices)
    }

    /// Full vector supplying the non-calibrated coordinates.
    pub fn pinned(&self) -> ParameterVector {
        self.fixed.clone().unwrap_or_else(|| self.space.center())
    }

    /// The seed shared by all candidates under [`SeedPolicy::Common`], and
    /// the seed a synthetic target should be generated with.
    pub fn simulation_seed(&self) -> u64 {
        derive_seed(self.seed, SIMULATION_STREAM)
    }

    /// ABM seed of the candidate stored at `row`.
    pub fn candidate_seed(&self, row: usize) -> u64 {
        match self.seed_policy {
            SeedPolicy::Common => self.simulation_seed(),
            SeedPolicy::PerCandidate => derive_seed(self.simulation_seed(), row as u64),
        }
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub iteration: usize,
    pub seed: u64,
    pub ksts: f64,
    pub label: Label,
    pub params: ParameterVector,
}

/// Append-only record of every evaluation in a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthDb {
    rows: Vec<LabeledSample>,
}

impl GroundTruthDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: LabeledSample) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[LabeledSample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }

    pub fn best(&self) -> Result<&LabeledSample> {
        select_optimal(&self.rows)
    }
}

impl From<Vec<LabeledSample>> for GroundTruthDb {
    fn from(rows: Vec<LabeledSample>) -> Self {
        Self { rows }
    }
}

/// Row with the lowest KS statistic; the earliest such row on ties.
pub fn select_optimal(rows: &[LabeledSample]) -> Result<&LabeledSample> {
    let mut best: Option<&LabeledSample> = None;
    for r in rows {
        if best.is_none_or(|b| r.ksts < b.ksts) {
            best = Some(r);
        }
    }
    best.ok_or(Error::Empty("no evaluated candidates"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Threshold,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub optimal: ParameterVector,
    pub optimal_ksts: f64,
    pub evaluations_used: usize,
    pub stop_reason: StopReason,
    /// `(evaluations, best ksts)` at every strict improvement.
    pub trace: Vec<(usize, f64)>,
}

/// A finished run with its database and bookkeeping.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: RunResult,
    pub db: GroundTruthDb,
    pub surrogate_fits: usize,
    pub covariance_resets: usize,
}

/// Runs one simulation and scores it against the target.
pub fn evaluate_candidate(
    params: &[f64],
    actual: &CumulativeDistribution,
    config: &FrameworkConfig,
    seed: u64,
) -> Result<LabeledSample> {
    let series = simulate(params, &config.simulation, seed)?;
    let outcome = compare(actual, &to_cdf(&series), config.alpha, config.simulation.population)?;
    Ok(LabeledSample {
        iteration: 0,
        seed,
        ksts: outcome.statistic,
        label: outcome.label,
        params: ParameterVector(params.to_vec()),
    })
}

/// Executes batches of independent evaluations.
pub trait Evaluator {
    /// Calls `job` for every index in `0..n`, returning results in index order.
    fn map(&self, n: usize, job: &(dyn Fn(usize) -> Result<LabeledSample> + Sync)) -> Result<Vec<LabeledSample>>;
}

/// Evaluates one candidate after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Evaluator for Sequential {
    fn map(&self, n: usize, job: &(dyn Fn(usize) -> Result<LabeledSample> + Sync)) -> Result<Vec<LabeledSample>> {
        (0..n).map(job).collect()
    }
}

/// The trainer a configuration asks for: cross-validated selection for
/// classifiers (their gate is the cross-validated F1) or when no family is
/// named, otherwise the named family fitted directly.
pub fn default_trainer(config: &FrameworkConfig) -> Box<dyn SurrogateTrainer> {
    let families = match config.surrogate {
        Some(f) => alloc::vec![f],
        None => Family::ALL.to_vec(),
    };
    match (config.strategy.kind.surrogate_mode(), config.surrogate) {
        (Some(Mode::Regressor), Some(f)) => Box::new(FamilyTrainer(f)),
        _ => Box::new(BestOfFamilies {
            families,
            folds: CLASSIFIER_FOLDS,
        }),
    }
}

/// Calibrates against `actual` with sequential evaluation and the default trainer.
pub fn run(config: &FrameworkConfig, actual: &EpidemicSeries) -> Result<RunOutput> {
    run_with(config, actual, &Sequential, default_trainer(config).as_ref())
}

pub fn run_with(
    config: &FrameworkConfig,
    actual: &EpidemicSeries,
    evaluator: &dyn Evaluator,
    trainer: &dyn SurrogateTrainer,
) -> Result<RunOutput> {
    let mut config = config.resolved();
    config.simulation.days = actual.days();
    config.validate()?;
    let target = to_cdf(actual);
    if target.is_degenerate() {
        return Err(Error::Config("target series has no infections".into()));
    }
    Calibration::new(&config, target, evaluator, trainer)?.execute()
}

struct Calibration<'a> {
    config: &'a FrameworkConfig,
    target: CumulativeDistribution,
    evaluator: &'a dyn Evaluator,
    trainer: &'a dyn SurrogateTrainer,
    space: ParameterSpace,
    free: Vec<usize>,
    pinned: ParameterVector,
    sampler: Sampler,
    rng: Stream,
    db: GroundTruthDb,
    trace: Vec<(usize, f64)>,
    iteration: usize,
    fits: usize,
}

impl<'a> Calibration<'a> {
    fn new(
        config: &'a FrameworkConfig,
        target: CumulativeDistribution,
        evaluator: &'a dyn Evaluator,
        trainer: &'a dyn SurrogateTrainer,
    ) -> Result<Self> {
        let free = config.free_indices()?;
        let space = config.space.subspace(&free)?;
        let sampler = Sampler::new(config.strategy.kind.sampler(), space.dim())?;
        Ok(Self {
            config,
            target,
            evaluator,
            trainer,
            space,
            free,
            pinned: config.pinned(),
            sampler,
            rng: stream(derive_seed(config.seed, STRATEGY_STREAM)),
            db: GroundTruthDb::new(),
            trace: Vec::new(),
            iteration: 0,
            fits: 0,
        })
    }

    fn execute(mut self) -> Result<RunOutput> {
        let config = self.config;
        while self.db.len() < config.abm_min_budget && !self.threshold_met() {
            let n = config.batch_size.min(config.abm_min_budget - self.db.len());
            let batch = self.sampler.draw(&self.space, n, &mut self.rng)?;
            self.evaluate(batch)?;
        }

        let strategy = &config.strategy;
        let start = self.db.len();
        let criteria = ConfidenceCriteria {
            f1_threshold: config.f1_threshold,
            rmse_threshold: config.rmse_threshold,
        };
        let mut surrogate: Option<Box<dyn Surrogate>> = None;
        let mut newest: Option<Range<usize>> = None;
        let mut search = match strategy.kind {
            StrategyKind::Msrs => Some(ResponseSurfaceSearch::new(Perturbation::Metric, &self.space)),
            StrategyKind::Dycors => Some(ResponseSurfaceSearch::new(Perturbation::Dynamic, &self.space)),
            _ => None,
        };
        let mut cmaes: Option<CmaEs> = None;

        while self.stop_reason().is_none() {
            self.iteration += 1;
            if let Some(mode) = strategy.kind.surrogate_mode() {
                let diverged = match (&surrogate, &newest) {
                    (None, _) => true,
                    (Some(s), Some(rows)) => !s.is_confident(&self.training_set(rows.clone())?, &criteria)?,
                    (Some(_), None) => false,
                };
                if diverged {
                    surrogate = self.fit(mode)?;
                }
            }

            let first = self.db.len();
            let n = config.batch_size.min(config.abm_max_budget - first);
            match (strategy.kind, surrogate.as_deref()) {
                (StrategyKind::SaRandom | StrategyKind::SaSobol, Some(s))
                    if s.validation_score() >= strategy.f1_threshold =>
                {
                    let batch = sa_sampler_batch(strategy, s, &self.space, &mut self.sampler, n, &mut self.rng)?;
                    self.evaluate(batch)?;
                }
                (StrategyKind::Msrs | StrategyKind::Dycors, Some(s)) => {
                    let search = search.as_mut().ok_or(Error::MissingSurrogate("response surface"))?;
                    let picks = strategy.inner_iterations.min(n);
                    let mut done = 0;
                    while done < picks && !self.threshold_met() {
                        let best = self.project(&self.db.best()?.params);
                        let before = self.db.best()?.ksts;
                        let evaluated = self
                            .db
                            .rows()
                            .iter()
                            .map(|r| self.space.to_unit(&self.project(&r.params)))
                            .collect::<Result<Vec<_>>>()?;
                        let budget = Budget {
                            used: self.db.len(),
                            start,
                            max: config.abm_max_budget,
                        };
                        let pick = search.propose(strategy, s, &self.space, &best, &evaluated, budget, &mut self.rng)?;
                        self.evaluate(alloc::vec![pick])?;
                        search.record(self.db.best()?.ksts < before);
                        done += 1;
                    }
                    if !self.threshold_met() {
                        let fill = self.sampler.draw(&self.space, n - done, &mut self.rng)?;
                        self.evaluate(fill)?;
                    }
                }
                (StrategyKind::Cmaes, Some(s)) => {
                    let es = match &mut cmaes {
                        Some(es) => es,
                        None => cmaes.insert(CmaEs::new(self.space.dim(), config.batch_size)?),
                    };
                    let space = &self.space;
                    let ranked = es.step(|u| s.predict_value(&space.from_unit(u)?), &mut self.rng)?;
                    let batch = ranked
                        .iter()
                        .take(n)
                        .map(|u| space.from_unit(u))
                        .collect::<Result<Vec<_>>>()?;
                    self.evaluate(batch)?;
                }
                _ => {
                    let batch = self.sampler.draw(&self.space, n, &mut self.rng)?;
                    self.evaluate(batch)?;
                }
            }
            newest = Some(first..self.db.len());
        }

        let stop_reason = self.stop_reason().unwrap_or(StopReason::Budget);
        let best = self.db.best()?.clone();
        Ok(RunOutput {
            result: RunResult {
                optimal: best.params,
                optimal_ksts: best.ksts,
                evaluations_used: self.db.len(),
                stop_reason,
                trace: self.trace,
            },
            db: self.db,
            surrogate_fits: self.fits,
            covariance_resets: cmaes.map_or(0, |es| es.resets()),
        })
    }

    fn threshold_met(&self) -> bool {
        self.trace.last().is_some_and(|&(_, k)| k <= self.config.ks_threshold)
    }

    fn stop_reason(&self) -> Option<StopReason> {
        if self.threshold_met() {
            Some(StopReason::Threshold)
        } else if self.db.len() >= self.config.abm_max_budget {
            Some(StopReason::Budget)
        } else {
            None
        }
    }

    /// Fits a surrogate on the whole database, or returns `None` while the
    /// database cannot support one yet.
    fn fit(&mut self, mode: Mode) -> Result<Option<Box<dyn Surrogate>>> {
        if mode == Mode::Classifier {
            let need = phi(CLASSIFIER_FOLDS, self.space.dim());
            if self.db.count(Label::Positive) < need || self.db.count(Label::Negative) < need {
                return Ok(None);
            }
        }
        let data = self.training_set(0..self.db.len())?;
        let seed = derive_seed(derive_seed(self.config.seed, TRAINER_STREAM), self.iteration as u64);
        match self.trainer.train(mode, &data, seed) {
            Ok(s) => {
                self.fits += 1;
                Ok(Some(s))
            }
            Err(Error::InsufficientData(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn training_set(&self, rows: Range<usize>) -> Result<TrainingSet> {
        let rows = &self.db.rows()[rows];
        TrainingSet::new(
            self.space.clone(),
            rows.iter().map(|r| self.project(&r.params)).collect(),
            rows.iter().map(|r| r.label).collect(),
            rows.iter().map(|r| r.ksts).collect(),
        )
    }

    fn project(&self, full: &[f64]) -> ParameterVector {
        ParameterVector(self.free.iter().map(|&i| full[i]).collect())
    }

    fn embed(&self, sub: &[f64]) -> ParameterVector {
        let mut full = self.pinned.clone();
        for (&i, &x) in self.free.iter().zip(sub) {
            full.0[i] = x;
        }
        full
    }

    fn evaluate(&mut self, batch: Vec<ParameterVector>) -> Result<()> {
        let first = self.db.len();
        let candidates: Vec<ParameterVector> = batch.iter().map(|c| self.embed(c)).collect();
        let config = self.config;
        let target = &self.target;
        let iteration = self.iteration;
        let rows = self.evaluator.map(candidates.len(), &|k| {
            let seed = config.candidate_seed(first + k);
            let mut row = evaluate_candidate(&candidates[k], target, config, seed)?;
            row.iteration = iteration;
            Ok(row)
        })?;
        check_dim(candidates.len(), rows.len())?;
        for row in rows {
            let best = self.trace.last().map_or(f64::INFINITY, |&(_, k)| k);
            if row.ksts < best {
                self.trace.push((self.db.len() + 1, row.ksts));
            }
            self.db.push(row);
        }
        Ok(())
    }
}
