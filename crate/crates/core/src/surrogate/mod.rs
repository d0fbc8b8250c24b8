//! Surrogate models of the calibration objective.
//!
//! A surrogate is fitted either as a classifier (predicting the KS label) or
//! as a regressor (predicting the KS statistic). Inputs are range-normalised
//! to the unit box before any model sees them.

pub mod gbt;
pub mod svm;
pub mod tree;

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::ks::Label;
use crate::rng::{shuffle, stream};
use crate::space::{ParameterSpace, ParameterVector};

use gbt::{BoostParams, Booster, Loss};
use svm::{SvmModel, SvmParams};
use tree::{Criterion, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    DecisionTree,
    GradientBoostedTrees,
    SupportVectorMachine,
}

impl Family {
    pub const ALL: [Family; 3] = [
        Family::DecisionTree,
        Family::GradientBoostedTrees,
        Family::SupportVectorMachine,
    ];

    pub fn short_name(&self) -> &'static str {
        match self {
            Family::DecisionTree => "DT",
            Family::GradientBoostedTrees => "GBT",
            Family::SupportVectorMachine => "SVM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Classifier,
    Regressor,
}

impl Mode {
    fn name(&self) -> &'static str {
        match self {
            Mode::Classifier => "classifier",
            Mode::Regressor => "regressor",
        }
    }
}

/// Evaluated candidates, as seen by a surrogate.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    space: ParameterSpace,
    inputs: Vec<ParameterVector>,
    labels: Vec<Label>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(
        space: ParameterSpace,
        inputs: Vec<ParameterVector>,
        labels: Vec<Label>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        check_dim(inputs.len(), labels.len())?;
        check_dim(inputs.len(), targets.len())?;
        for v in &inputs {
            check_dim(space.dim(), v.len())?;
        }
        if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("targets must lie in [0, 1]".into()));
        }
        Ok(Self {
            space,
            inputs,
            labels,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn inputs(&self) -> &[ParameterVector] {
        &self.inputs
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            space: self.space.clone(),
            inputs: rows.iter().map(|&r| self.inputs[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
        }
    }

    fn features(&self) -> Vec<Vec<f64>> {
        self.inputs
            .iter()
            .map(|v| unit_features(&self.space, v))
            .collect()
    }
}

fn unit_features(space: &ParameterSpace, v: &[f64]) -> Vec<f64> {
    space
        .specs()
        .iter()
        .zip(v)
        .map(|(s, &x)| (x - s.lower) / s.width())
        .collect()
}

/// Thresholds a surrogate must meet on the newest batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceCriteria {
    pub f1_threshold: f64,
    pub rmse_threshold: f64,
}

/// A fitted approximator of the objective.
pub trait Surrogate {
    fn mode(&self) -> Mode;

    fn predict_label(&self, v: &[f64]) -> Result<Label>;

    /// Predicted KS statistic, clipped to [0, 1].
    fn predict_value(&self, v: &[f64]) -> Result<f64>;

    /// F1 (classifier) or RMSE (regressor) recorded when the model was fitted.
    fn validation_score(&self) -> f64;

    /// Whether the model still meets the criteria on `batch`.
    fn is_confident(&self, batch: &TrainingSet, criteria: &ConfidenceCriteria) -> Result<bool> {
        match self.mode() {
            Mode::Classifier => {
                let predicted = batch
                    .inputs()
                    .iter()
                    .map(|v| self.predict_label(v))
                    .collect::<Result<Vec<_>>>()?;
                Ok(f1_score(&predicted, batch.labels())? >= criteria.f1_threshold)
            }
            Mode::Regressor => {
                let predicted = batch
                    .inputs()
                    .iter()
                    .map(|v| self.predict_value(v))
                    .collect::<Result<Vec<_>>>()?;
                Ok(rmse(&predicted, batch.targets())? <= criteria.rmse_threshold)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Model {
    Tree(Tree),
    Boosted(Booster),
    Svm(SvmModel),
}

/// One of the built-in model families, fitted on a [`TrainingSet`].
#[derive(Debug, Clone)]
pub struct FittedSurrogate {
    family: Family,
    mode: Mode,
    space: ParameterSpace,
    model: Model,
    validation_score: f64,
}

impl FittedSurrogate {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn with_validation_score(mut self, score: f64) -> Self {
        self.validation_score = score;
        self
    }

    /// Boosting loss per round, when the family is gradient boosted trees.
    pub fn boosting_loss_trace(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Boosted(b) => Some(&b.loss_trace),
            _ => None,
        }
    }

    pub fn svm(&self) -> Option<&SvmModel> {
        match &self.model {
            Model::Svm(m) => Some(m),
            _ => None,
        }
    }

    /// Unclipped model output: positive-class score or predicted value.
    fn raw(&self, v: &[f64]) -> Result<f64> {
        check_dim(self.space.dim(), v.len())?;
        let x = unit_features(&self.space, v);
        Ok(match &self.model {
            Model::Tree(t) => t.predict(&x),
            Model::Boosted(b) => b.predict(&x),
            Model::Svm(m) => m.decision(&x),
        })
    }

    fn mode_error(&self, requested: Mode) -> Error {
        Error::Mode {
            fitted: self.mode.name(),
            requested: requested.name(),
        }
    }
}

impl Surrogate for FittedSurrogate {
    fn mode(&self) -> Mode {
        self.mode
    }

    fn predict_label(&self, v: &[f64]) -> Result<Label> {
        if self.mode != Mode::Classifier {
            return Err(self.mode_error(Mode::Classifier));
        }
        let raw = self.raw(v)?;
        let positive = match self.model {
            Model::Svm(_) => raw >= 0.0,
            _ => raw >= 0.5,
        };
        Ok(if positive { Label::Positive } else { Label::Negative })
    }

    fn predict_value(&self, v: &[f64]) -> Result<f64> {
        if self.mode != Mode::Regressor {
            return Err(self.mode_error(Mode::Regressor));
        }
        Ok(clip_unit(self.raw(v)?))
    }

    fn validation_score(&self) -> f64 {
        self.validation_score
    }
}

#[inline]
pub fn clip_unit(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Fits one family in one mode. The validation score is the training-set
/// score; cross-validation overrides it where used.
pub fn fit(family: Family, mode: Mode, data: &TrainingSet) -> Result<FittedSurrogate> {
    match mode {
        Mode::Classifier => {
            if data.count(Label::Positive) == 0 || data.count(Label::Negative) == 0 {
                return Err(Error::InsufficientData(
                    "classifier needs both positive and negative rows".into(),
                ));
            }
        }
        Mode::Regressor => {
            if data.len() < 2 {
                return Err(Error::InsufficientData("regressor needs at least two rows".into()));
            }
        }
    }
    let x = data.features();
    let positive: Vec<bool> = data.labels().iter().map(Label::is_positive).collect();
    let binary: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect();
    let model = match (family, mode) {
        (Family::DecisionTree, Mode::Classifier) => {
            Model::Tree(Tree::fit(&x, &binary, Criterion::Gini, TreeParams::default()))
        }
        (Family::DecisionTree, Mode::Regressor) => Model::Tree(Tree::fit(
            &x,
            data.targets(),
            Criterion::Variance,
            TreeParams::default(),
        )),
        (Family::GradientBoostedTrees, Mode::Classifier) => {
            Model::Boosted(Booster::fit(&x, &binary, Loss::Logistic, BoostParams::default()))
        }
        (Family::GradientBoostedTrees, Mode::Regressor) => Model::Boosted(Booster::fit(
            &x,
            data.targets(),
            Loss::Squared,
            BoostParams::default(),
        )),
        (Family::SupportVectorMachine, Mode::Classifier) => {
            Model::Svm(SvmModel::fit_classifier(&x, &positive, SvmParams::default()))
        }
        (Family::SupportVectorMachine, Mode::Regressor) => {
            Model::Svm(SvmModel::fit_regressor(&x, data.targets(), SvmParams::default()))
        }
    };
    let mut fitted = FittedSurrogate {
        family,
        mode,
        space: data.space().clone(),
        model,
        validation_score: 0.0,
    };
    fitted.validation_score = score_on(&fitted, data)?;
    Ok(fitted)
}

fn score_on(s: &dyn Surrogate, data: &TrainingSet) -> Result<f64> {
    match s.mode() {
        Mode::Classifier => {
            let p = data
                .inputs()
                .iter()
                .map(|v| s.predict_label(v))
                .collect::<Result<Vec<_>>>()?;
            f1_score(&p, data.labels())
        }
        Mode::Regressor => {
            let p = data
                .inputs()
                .iter()
                .map(|v| s.predict_value(v))
                .collect::<Result<Vec<_>>>()?;
            rmse(&p, data.targets())
        }
    }
}

/// F1 score of the positive class; 0 when precision + recall is 0.
pub fn f1_score(predicted: &[Label], truth: &[Label]) -> Result<f64> {
    check_dim(truth.len(), predicted.len())?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (p, t) in predicted.iter().zip(truth) {
        match (p.is_positive(), t.is_positive()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

pub fn rmse(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_dim(truth.len(), predicted.len())?;
    if truth.is_empty() {
        return Err(Error::Empty("rmse of an empty batch"));
    }
    let sse: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(libm::sqrt(sse / truth.len() as f64))
}

/// Assigns rows to `k` folds, stratified by label in classifier mode.
pub fn fold_assignment(data: &TrainingSet, mode: Mode, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream(seed);
    let mut fold = alloc::vec![0; data.len()];
    let groups: Vec<Vec<usize>> = match mode {
        Mode::Classifier => [Label::Positive, Label::Negative]
            .iter()
            .map(|&l| (0..data.len()).filter(|&r| data.labels()[r] == l).collect())
            .collect(),
        Mode::Regressor => alloc::vec![(0..data.len()).collect()],
    };
    let mut next = 0;
    for mut g in groups {
        shuffle(&mut g, &mut rng);
        for r in g {
            fold[r] = next % k;
            next += 1;
        }
    }
    fold
}

/// Mean validation score over `k` folds.
pub fn cross_validate(family: Family, mode: Mode, data: &TrainingSet, k: usize, seed: u64) -> Result<f64> {
    if k < 2 || data.len() < k {
        return Err(Error::InsufficientData(alloc::format!(
            "{} rows cannot be split into {k} folds",
            data.len()
        )));
    }
    if mode == Mode::Classifier && (data.count(Label::Positive) == 0 || data.count(Label::Negative) == 0) {
        return Err(Error::InsufficientData("cross-validation needs both labels".into()));
    }
    let fold = fold_assignment(data, mode, k, seed);
    let mut total = 0.0;
    for f in 0..k {
        let train: Vec<usize> = (0..data.len()).filter(|&r| fold[r] != f).collect();
        let test: Vec<usize> = (0..data.len()).filter(|&r| fold[r] == f).collect();
        let model = fit(family, mode, &data.subset(&train))?;
        total += score_on(&model, &data.subset(&test))?;
    }
    Ok(total / k as f64)
}

/// Produces fitted surrogates for the calibration loop.
pub trait SurrogateTrainer {
    fn train(&self, mode: Mode, data: &TrainingSet, seed: u64) -> Result<Box<dyn Surrogate>>;
}

/// Trains a single configured family.
#[derive(Debug, Clone, Copy)]
pub struct FamilyTrainer(pub Family);

impl SurrogateTrainer for FamilyTrainer {
    fn train(&self, mode: Mode, data: &TrainingSet, _seed: u64) -> Result<Box<dyn Surrogate>> {
        Ok(Box::new(fit(self.0, mode, data)?))
    }
}

/// Cross-validates every family and keeps the best one, refitted on all rows.
/// The returned model's validation score is its cross-validated score.
#[derive(Debug, Clone)]
pub struct BestOfFamilies {
    pub families: Vec<Family>,
    pub folds: usize,
}

impl Default for BestOfFamilies {
    fn default() -> Self {
        Self {
            families: Family::ALL.to_vec(),
            folds: 3,
        }
    }
}

impl BestOfFamilies {
    pub fn select(&self, mode: Mode, data: &TrainingSet, seed: u64) -> Result<FittedSurrogate> {
        let mut best: Option<(Family, f64)> = None;
        for &family in &self.families {
            let score = cross_validate(family, mode, data, self.folds, seed)?;
            let better = match (best, mode) {
                (None, _) => true,
                (Some((_, b)), Mode::Classifier) => score > b,
                (Some((_, b)), Mode::Regressor) => score < b,
            };
            if better {
                best = Some((family, score));
            }
        }
        let (family, score) = best.ok_or(Error::Config("no surrogate families configured".into()))?;
        Ok(fit(family, mode, data)?.with_validation_score(score))
    }
}

impl SurrogateTrainer for BestOfFamilies {
    fn train(&self, mode: Mode, data: &TrainingSet, seed: u64) -> Result<Box<dyn Surrogate>> {
        Ok(Box::new(self.select(mode, data, seed)?))
    }
}

#[cfg(test)]
mod tests;
