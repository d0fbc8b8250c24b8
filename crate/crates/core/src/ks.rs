//! Scale-invariant two-sample Kolmogorov–Smirnov distance between daily
//! infection series.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::abm::EpidemicSeries;
use crate::error::{check_dim, Error, Result};

/// Normalised cumulative sum of a daily series.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeDistribution {
    values: Vec<f64>,
    degenerate: bool,
}

impl CumulativeDistribution {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True for an all-zero source series, whose distribution is all zeros.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn to_cdf(series: &EpidemicSeries) -> CumulativeDistribution {
    cdf_from_counts(series.as_slice())
}

pub fn cdf_from_counts(counts: &[u64]) -> CumulativeDistribution {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return CumulativeDistribution {
            values: alloc::vec![0.0; counts.len()],
            degenerate: true,
        };
    }
    let mut acc = 0u64;
    let values = counts
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / total as f64
        })
        .collect();
    CumulativeDistribution {
        values,
        degenerate: false,
    }
}

/// Largest absolute gap between the two distributions over time.
pub fn ks_statistic(actual: &CumulativeDistribution, simulated: &CumulativeDistribution) -> Result<f64> {
    check_dim(actual.len(), simulated.len())?;
    match (actual.degenerate, simulated.degenerate) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(1.0),
        _ => {}
    }
    Ok(actual
        .values
        .iter()
        .zip(&simulated.values)
        .map(|(a, s)| (a - s).abs())
        .fold(0.0, f64::max))
}

/// `c(alpha) = sqrt(-ln(alpha) / 2)`.
pub fn c_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Alpha(alpha));
    }
    Ok(libm::sqrt(-libm::log(alpha) * 0.5))
}

/// Rejection threshold `c(alpha) * sqrt(2N / N^2)` for a population of `N`.
pub fn critical_value(alpha: f64, population: usize) -> Result<f64> {
    if population == 0 {
        return Err(Error::Config("population must be at least 1".into()));
    }
    let n = population as f64;
    Ok(c_alpha(alpha)? * libm::sqrt(2.0 * n / (n * n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }

    pub fn is_positive(&self) -> bool {
        *self == Label::Positive
    }
}

/// Positive when the distributions are not distinguishable at the threshold.
/// A statistic equal to the critical value counts as positive.
pub fn label(statistic: f64, critical: f64) -> Label {
    if statistic <= critical {
        Label::Positive
    } else {
        Label::Negative
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub label: Label,
}

pub fn compare(
    actual: &CumulativeDistribution,
    simulated: &CumulativeDistribution,
    alpha: f64,
    population: usize,
) -> Result<KsOutcome> {
    let statistic = ks_statistic(actual, simulated)?;
    let critical = critical_value(alpha, population)?;
    Ok(KsOutcome {
        statistic,
        critical,
        label: label(statistic, critical),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cdf(v: &[u64]) -> CumulativeDistribution {
        cdf_from_counts(v)
    }

    #[test]
    fn cdf_examples() {
        let c = cdf(&[1, 2, 3]);
        assert!((c.values()[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((c.values()[1] - 0.5).abs() < 1e-15);
        assert_eq!(c.values()[2], 1.0);
        assert_eq!(cdf(&[7]).values(), &[1.0]);
        let z = cdf(&[0, 0, 0]);
        assert!(z.is_degenerate());
        assert_eq!(z.values(), &[0.0; 3]);
    }

    #[test]
    fn statistic_examples() {
        let a = cdf(&[1, 2, 3]);
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        let d = ks_statistic(&a, &cdf(&[3, 2, 1])).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ks_statistic(&a, &cdf(&[0, 0, 0])).unwrap(), 1.0);
        assert_eq!(ks_statistic(&cdf(&[0, 0, 0]), &a).unwrap(), 1.0);
        assert!(matches!(ks_statistic(&a, &cdf(&[1])), Err(Error::Dimension { .. })));
    }

    #[test]
    fn critical_values() {
        assert!((c_alpha(0.05).unwrap() - 1.2239).abs() < 1e-4);
        assert!((critical_value(0.05, 100).unwrap() - 0.17307).abs() < 1e-4);
        assert!(critical_value(0.05, 101).unwrap() < critical_value(0.05, 100).unwrap());
        assert!(matches!(critical_value(0.0, 10), Err(Error::Alpha(_))));
        assert!(matches!(critical_value(1.0, 10), Err(Error::Alpha(_))));
    }

    #[test]
    fn labelling() {
        assert_eq!(label(0.0, 0.05), Label::Positive);
        assert_eq!(label(1.0, 0.05), Label::Negative);
        assert_eq!(label(0.05, 0.05), Label::Positive);
    }

    proptest! {
        #[test]
        fn scale_invariance(v in proptest::collection::vec(0u64..1000, 1..60), k in 1u64..50) {
            prop_assume!(v.iter().any(|&x| x > 0));
            let scaled: Vec<u64> = v.iter().map(|x| x * k).collect();
            prop_assert!(ks_statistic(&cdf(&v), &cdf(&scaled)).unwrap() < 1e-12);
        }

        #[test]
        fn bounded_and_symmetric(
            a in proptest::collection::vec(0u64..100, 20),
            b in proptest::collection::vec(0u64..100, 20),
        ) {
            let (ca, cb) = (cdf(&a), cdf(&b));
            let ab = ks_statistic(&ca, &cb).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, ks_statistic(&cb, &ca).unwrap());
        }
    }

    #[test]
    fn monotone_cdf() {
        let c = cdf(&[0, 5, 0, 3, 9]);
        assert!(c.values().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*c.values().last().unwrap(), 1.0);
    }
}
