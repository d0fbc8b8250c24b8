//! Accuracy and efficiency measures over finished runs.

use crate::error::{Error, Result};
use crate::framework::RunResult;

/// KS statistic a run must reach to count as `level`-similar.
pub fn success_threshold(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(alloc::format!("success level {level} outside (0, 1)")));
    }
    Ok(1.0 - level)
}

/// Fraction of runs whose best KS statistic is at most `1 - level`.
pub fn success_at(results: &[RunResult], level: f64) -> Result<f64> {
    let threshold = success_threshold(level)?;
    if results.is_empty() {
        return Err(Error::Empty("success rate over no runs"));
    }
    let hits = results.iter().filter(|r| r.optimal_ksts <= threshold).count();
    Ok(hits as f64 / results.len() as f64)
}

/// Evaluations a run had consumed when it first reached `threshold`.
pub fn evaluations_to_threshold(result: &RunResult, threshold: f64) -> Option<usize> {
    result
        .trace
        .iter()
        .find(|&&(_, ksts)| ksts <= threshold)
        .map(|&(evaluations, _)| evaluations)
}

/// Mean evaluations-to-level over the runs that reached it.
pub fn mean_evaluations_to_level(results: &[RunResult], level: f64) -> Result<Option<f64>> {
    let threshold = success_threshold(level)?;
    let (sum, n) = results
        .iter()
        .filter_map(|r| evaluations_to_threshold(r, threshold))
        .fold((0usize, 0usize), |(s, n), e| (s + e, n + 1));
    Ok((n > 0).then(|| sum as f64 / n as f64))
}

/// Baseline mean evaluations-to-level divided by the strategy's.
///
/// `None` when no baseline run reached the level; `Some(0.0)` when the
/// strategy never did.
pub fn speedup(strategy: &[RunResult], baseline: &[RunResult], level: f64) -> Result<Option<f64>> {
    if strategy.is_empty() || baseline.is_empty() {
        return Err(Error::Empty("speedup needs runs on both sides"));
    }
    let Some(base) = mean_evaluations_to_level(baseline, level)? else {
        return Ok(None);
    };
    Ok(Some(match mean_evaluations_to_level(strategy, level)? {
        Some(own) => base / own,
        None => 0.0,
    }))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}
