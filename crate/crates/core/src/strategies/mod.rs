//! Candidate-generation strategies.
//!
//! Baselines and the surrogate-assisted samplers produce whole batches.
//! The response-surface searches (MSRS, DYCORS) produce one candidate per
//! inner iteration, which the caller evaluates before asking for the next.

pub mod cmaes;

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::ks::Label;
use crate::rng::shuffle;
use crate::sobol::SobolSequence;
use crate::space::{ParameterSpace, ParameterVector};
use crate::surrogate::{Mode, Surrogate};

pub use cmaes::CmaEs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    RandomBaseline,
    SobolBaseline,
    SaRandom,
    SaSobol,
    Msrs,
    Dycors,
    Cmaes,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::RandomBaseline,
        StrategyKind::SobolBaseline,
        StrategyKind::SaRandom,
        StrategyKind::SaSobol,
        StrategyKind::Msrs,
        StrategyKind::Dycors,
        StrategyKind::Cmaes,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::RandomBaseline => "Random",
            StrategyKind::SobolBaseline => "Sobol",
            StrategyKind::SaRandom => "SA Random",
            StrategyKind::SaSobol => "SA Sobol",
            StrategyKind::Msrs => "MSRS",
            StrategyKind::Dycors => "DYCORS",
            StrategyKind::Cmaes => "CMA-ES",
        }
    }

    /// The surrogate mode the strategy consumes, if any.
    pub fn surrogate_mode(&self) -> Option<Mode> {
        match self {
            StrategyKind::RandomBaseline | StrategyKind::SobolBaseline => None,
            StrategyKind::SaRandom | StrategyKind::SaSobol => Some(Mode::Classifier),
            StrategyKind::Msrs | StrategyKind::Dycors | StrategyKind::Cmaes => Some(Mode::Regressor),
        }
    }

    /// The plain sampler used for initialisation and batch fill.
    pub fn sampler(&self) -> SamplerKind {
        match self {
            StrategyKind::SobolBaseline | StrategyKind::SaSobol => SamplerKind::Sobol,
            _ => SamplerKind::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub batch_size: usize,
    pub inner_samples: usize,
    pub inner_iterations: usize,
    pub epsilon: f64,
    pub weight_cycle: Vec<f64>,
    pub f1_threshold: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::RandomBaseline,
            batch_size: 250,
            inner_samples: 1000,
            inner_iterations: 3,
            epsilon: 0.10,
            weight_cycle: alloc::vec![0.3, 0.5, 0.7, 0.95],
            f1_threshold: 0.90,
        }
    }
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.inner_samples == 0 || self.inner_iterations == 0 {
            return Err(Error::Config("strategy counts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(alloc::format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if self.weight_cycle.is_empty() || self.weight_cycle.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Config("weight cycle must be non-empty with weights in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.f1_threshold) {
            return Err(Error::Config("f1 threshold outside [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Random,
    Sobol,
}

/// Plain candidate source: uniform draws or a continuing Sobol sequence.
#[derive(Debug, Clone)]
pub enum Sampler {
    Random,
    Sobol(SobolSequence),
}

impl Sampler {
    pub fn new(kind: SamplerKind, dimension: usize) -> Result<Self> {
        Ok(match kind {
            SamplerKind::Random => Sampler::Random,
            SamplerKind::Sobol => Sampler::Sobol(SobolSequence::new(dimension)?),
        })
    }

    pub fn draw<R: Rng + ?Sized>(
        &mut self,
        space: &ParameterSpace,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<ParameterVector>> {
        match self {
            Sampler::Random => Ok((0..n).map(|_| space.sample_uniform(rng)).collect()),
            Sampler::Sobol(seq) => seq.sample(space, n),
        }
    }
}

/// Minimum number of positive and of negative rows before the
/// surrogate-assisted samplers may run.
pub fn phi(n_folds: usize, n_parameters: usize) -> usize {
    n_folds + n_parameters + 1
}

/// Weighted score of a candidate; lower is better.
pub fn merit(s_scaled: f64, d_scaled: f64, w: f64) -> f64 {
    w * s_scaled + (1.0 - w) * (1.0 - d_scaled)
}

/// Linear rescale onto [0, 1]; a constant input maps to all zeros.
pub fn min_max_scale(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return alloc::vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / span).collect()
}

/// Index of the merit-minimising candidate, earliest on ties.
pub fn select_by_merit(predictions: &[f64], distances: &[f64], w: f64) -> Result<usize> {
    check_dim(predictions.len(), distances.len())?;
    if predictions.is_empty() {
        return Err(Error::Empty("merit selection over an empty pool"));
    }
    let s = min_max_scale(predictions);
    let d = min_max_scale(distances);
    Ok(argmin(s.iter().zip(&d).map(|(&s, &d)| merit(s, d, w))))
}

fn argmin<I: Iterator<Item = f64>>(values: I) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Euclidean distance from `point` to the nearest of `others` (unit coordinates).
pub fn nearest_distance(point: &[f64], others: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for o in others {
        let d2: f64 = point.iter().zip(o).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best {
            best = d2;
        }
    }
    libm::sqrt(best)
}

/// Coordinate-inclusion probability for dynamic coordinate search.
pub fn dycors_perturbation_probability(n: usize, n0: usize, n_max: usize, d: usize) -> Result<f64> {
    if n >= n_max {
        return Err(Error::Contract("perturbation probability requested at or past the budget"));
    }
    if n < n0 || d == 0 {
        return Err(Error::Contract("perturbation probability needs n0 <= n and d > 0"));
    }
    let d = d as f64;
    let base = (20.0 / d).min(1.0);
    let span = libm::log((n_max - n0) as f64);
    let decay = if span > 0.0 {
        1.0 - libm::log((n - n0 + 1) as f64) / span
    } else {
        1.0
    };
    Ok((base * decay).clamp(1.0 / d, 1.0))
}

/// Includes each coordinate with probability `p`, forcing one if none was.
pub fn coordinate_mask<R: Rng + ?Sized>(d: usize, p: f64, rng: &mut R) -> Vec<bool> {
    let mut mask: Vec<bool> = (0..d).map(|_| rng.random::<f64>() < p).collect();
    if d > 0 && !mask.iter().any(|&m| m) {
        mask[rng.random_range(0..d)] = true;
    }
    mask
}

/// Per-coordinate step sizes adapted by runs of successes and failures.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSize {
    sigma: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
    successes: usize,
    failures: usize,
}

impl StepSize {
    pub const TOLERANCE: usize = 3;

    pub fn new(space: &ParameterSpace) -> Self {
        let widths: Vec<f64> = space.specs().iter().map(|s| s.width()).collect();
        Self {
            sigma: widths.iter().map(|w| 0.2 * w).collect(),
            min: widths.iter().map(|w| 0.005 * w).collect(),
            max: widths.iter().map(|w| 0.2 * w).collect(),
            successes: 0,
            failures: 0,
        }
    }

    /// Starts every step at `fraction` of its range, within the bounds.
    pub fn with_fraction(space: &ParameterSpace, fraction: f64) -> Self {
        let mut s = Self::new(space);
        for (i, spec) in space.specs().iter().enumerate() {
            s.sigma[i] = (fraction * spec.width()).clamp(s.min[i], s.max[i]);
        }
        s
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.min, &self.max)
    }

    /// Counts an evaluated pick; doubles or halves the steps after
    /// [`Self::TOLERANCE`] consecutive outcomes of one kind.
    pub fn record(&mut self, improved: bool) {
        if improved {
            self.successes += 1;
            self.failures = 0;
            if self.successes >= Self::TOLERANCE {
                self.successes = 0;
                for (s, hi) in self.sigma.iter_mut().zip(&self.max) {
                    *s = (*s * 2.0).min(*hi);
                }
            }
        } else {
            self.failures += 1;
            self.successes = 0;
            if self.failures >= Self::TOLERANCE {
                self.failures = 0;
                for (s, lo) in self.sigma.iter_mut().zip(&self.min) {
                    *s = (*s * 0.5).max(*lo);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    /// Every coordinate perturbed; selection by weighted merit.
    Metric,
    /// A random coordinate subset perturbed; selection by prediction alone.
    Dynamic,
}

/// Where a response-surface search stands in the evaluation budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub used: usize,
    pub start: usize,
    pub max: usize,
}

/// State of an MSRS or DYCORS search.
#[derive(Debug, Clone)]
pub struct ResponseSurfaceSearch {
    perturbation: Perturbation,
    step: StepSize,
    weight_index: usize,
}

impl ResponseSurfaceSearch {
    pub fn new(perturbation: Perturbation, space: &ParameterSpace) -> Self {
        Self {
            perturbation,
            step: StepSize::new(space),
            weight_index: 0,
        }
    }

    pub fn step_size(&self) -> &StepSize {
        &self.step
    }

    /// The weight the next metric selection will use.
    pub fn current_weight(&self, cycle: &[f64]) -> f64 {
        cycle[self.weight_index % cycle.len()]
    }

    /// Selects one candidate around `best`.
    ///
    /// `evaluated` holds every evaluated point in unit coordinates.
    pub fn propose<R: Rng + ?Sized>(
        &mut self,
        config: &StrategyConfig,
        surrogate: &dyn Surrogate,
        space: &ParameterSpace,
        best: &[f64],
        evaluated: &[Vec<f64>],
        budget: Budget,
        rng: &mut R,
    ) -> Result<ParameterVector> {
        check_dim(space.dim(), best.len())?;
        let d = space.dim();
        let mut pool = Vec::with_capacity(config.inner_samples);
        match self.perturbation {
            Perturbation::Metric => {
                let mask = alloc::vec![true; d];
                for _ in 0..config.inner_samples {
                    pool.push(space.perturb_gaussian(best, self.step.sigma(), &mask, rng)?);
                }
            }
            Perturbation::Dynamic => {
                let p = dycors_perturbation_probability(budget.used, budget.start, budget.max, d)?;
                for _ in 0..config.inner_samples {
                    let mask = coordinate_mask(d, p, rng);
                    pool.push(space.perturb_coordinates(best, self.step.sigma(), &mask, rng)?);
                }
            }
        }
        let predictions = pool
            .iter()
            .map(|c| surrogate.predict_value(c))
            .collect::<Result<Vec<_>>>()?;
        let pick = match self.perturbation {
            Perturbation::Metric => {
                let w = self.current_weight(&config.weight_cycle);
                self.weight_index = (self.weight_index + 1) % config.weight_cycle.len();
                let distances = pool
                    .iter()
                    .map(|c| Ok(nearest_distance(&space.to_unit(c)?, evaluated)))
                    .collect::<Result<Vec<_>>>()?;
                select_by_merit(&predictions, &distances, w)?
            }
            Perturbation::Dynamic => argmin(predictions.iter().copied()),
        };
        Ok(pool.swap_remove(pick))
    }

    /// Feeds back whether the evaluated pick improved the incumbent.
    pub fn record(&mut self, improved: bool) {
        self.step.record(improved);
    }
}

/// Draws `batch` candidates, a `1 - epsilon` share from the positive-labelled
/// ones, without replacement; a short class is made up from the other.
pub fn epsilon_greedy<R: Rng + ?Sized>(
    pool: Vec<ParameterVector>,
    labels: &[Label],
    batch: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<ParameterVector>> {
    check_dim(pool.len(), labels.len())?;
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for (c, l) in pool.into_iter().zip(labels) {
        if l.is_positive() {
            positive.push(c);
        } else {
            negative.push(c);
        }
    }
    shuffle(&mut positive, rng);
    shuffle(&mut negative, rng);
    let batch = batch.min(positive.len() + negative.len());
    let want_positive = libm::round((1.0 - epsilon) * batch as f64) as usize;
    let take_positive = want_positive.min(positive.len()).max(batch.saturating_sub(negative.len()));
    let take_negative = batch - take_positive;
    positive.truncate(take_positive);
    negative.truncate(take_negative);
    positive.extend(negative);
    Ok(positive)
}

/// One surrogate-assisted sampler batch: classify a temporary pool and
/// compose the batch epsilon-greedily.
pub fn sa_sampler_batch<R: Rng + ?Sized>(
    config: &StrategyConfig,
    classifier: &dyn Surrogate,
    space: &ParameterSpace,
    sampler: &mut Sampler,
    batch: usize,
    rng: &mut R,
) -> Result<Vec<ParameterVector>> {
    let pool = sampler.draw(space, config.inner_samples.max(batch), rng)?;
    let labels = pool
        .iter()
        .map(|c| classifier.predict_label(c))
        .collect::<Result<Vec<_>>>()?;
    epsilon_greedy(pool, &labels, batch, config.epsilon, rng)
}
