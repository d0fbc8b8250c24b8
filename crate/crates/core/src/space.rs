//! The box-bounded calibration space and the operations on points in it.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::{Deref, Index};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::standard_normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    Continuous,
    /// Whole numbers of days.
    IntegerDays,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: ParamKind,
}

impl ParameterSpec {
    pub fn new(name: &str, lower: f64, upper: f64, kind: ParamKind) -> Result<Self> {
        let spec = Self {
            name: name.to_string(),
            lower,
            upper,
            kind,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn continuous(name: &str, lower: f64, upper: f64) -> Result<Self> {
        Self::new(name, lower, upper, ParamKind::Continuous)
    }

    pub fn integer_days(name: &str, lower: f64, upper: f64) -> Result<Self> {
        Self::new(name, lower, upper, ParamKind::IntegerDays)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::InvalidSpace(alloc::format!(
                "{}: bounds must satisfy lower < upper",
                self.name
            )));
        }
        if self.kind == ParamKind::IntegerDays
            && (libm::round(self.lower) != self.lower || libm::round(self.upper) != self.upper)
        {
            return Err(Error::InvalidSpace(alloc::format!(
                "{}: integer-days bounds must be whole numbers",
                self.name
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Projects onto `[lower, upper]`, rounding integer-days values.
    #[inline]
    pub fn project(&self, x: f64) -> f64 {
        let x = if x.is_nan() { self.lower } else { x.clamp(self.lower, self.upper) };
        match self.kind {
            ParamKind::Continuous => x,
            ParamKind::IntegerDays => libm::round(x),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower
            && x <= self.upper
            && (self.kind == ParamKind::Continuous || libm::round(x) == x)
    }
}

/// Names of the seven calibrated model parameters, in canonical order.
pub const PARAMETER_NAMES: [&str; 7] = [
    "transmission_probability",
    "reinfection_probability",
    "death_probability",
    "infection_period",
    "detection_time",
    "speed",
    "interaction_radius",
];

/// An ordered list of parameter specs with unique names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParameterSpec>", into = "Vec<ParameterSpec>")]
pub struct ParameterSpace {
    specs: Vec<ParameterSpec>,
}

impl TryFrom<Vec<ParameterSpec>> for ParameterSpace {
    type Error = Error;

    fn try_from(specs: Vec<ParameterSpec>) -> Result<Self> {
        Self::new(specs)
    }
}

impl From<ParameterSpace> for Vec<ParameterSpec> {
    fn from(space: ParameterSpace) -> Self {
        space.specs
    }
}

impl Default for ParameterSpace {
    fn default() -> Self {
        Self::epidemic()
    }
}

impl ParameterSpace {
    pub fn new(specs: Vec<ParameterSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidSpace("at least one parameter required".into()));
        }
        for (i, s) in specs.iter().enumerate() {
            s.validate()?;
            if specs[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::InvalidSpace(alloc::format!("duplicate name {}", s.name)));
            }
        }
        Ok(Self { specs })
    }

    /// The seven-parameter space of the epidemic model.
    pub fn epidemic() -> Self {
        let c = ParamKind::Continuous;
        let days = ParamKind::IntegerDays;
        let rows = [
            (c, 0.0, 1.0),
            (c, 0.0, 1.0),
            (c, 0.0, 1.0),
            (days, 0.0, 41.0),
            (days, 0.0, 41.0),
            (c, 0.0, 1.0),
            (c, 0.0, 0.022),
        ];
        let specs = PARAMETER_NAMES
            .iter()
            .zip(rows)
            .map(|(name, (kind, lower, upper))| ParameterSpec {
                name: (*name).to_string(),
                lower,
                upper,
                kind,
            })
            .collect();
        Self { specs }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[ParameterSpec] {
        &self.specs
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    /// The space restricted to the given coordinate indices, in that order.
    pub fn subspace(&self, indices: &[usize]) -> Result<Self> {
        let mut specs = Vec::with_capacity(indices.len());
        for &i in indices {
            let spec = self.specs.get(i).ok_or_else(|| {
                Error::InvalidSpace(alloc::format!("index {i} outside a {}-d space", self.dim()))
            })?;
            specs.push(spec.clone());
        }
        Self::new(specs)
    }

    pub fn contains(&self, v: &ParameterVector) -> bool {
        v.len() == self.dim() && self.specs.iter().zip(v.iter()).all(|(s, &x)| s.contains(x))
    }

    pub fn center(&self) -> ParameterVector {
        ParameterVector(
            self.specs
                .iter()
                .map(|s| s.project(s.lower + 0.5 * s.width()))
                .collect(),
        )
    }

    /// Maps a point to the unit box (no rounding).
    pub fn to_unit(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), v.len())?;
        Ok(self
            .specs
            .iter()
            .zip(v)
            .map(|(s, &x)| (x - s.lower) / s.width())
            .collect())
    }

    /// Maps a unit-box point onto the space, then clamps and rounds.
    pub fn from_unit(&self, u: &[f64]) -> Result<ParameterVector> {
        check_dim(self.dim(), u.len())?;
        Ok(ParameterVector(
            self.specs
                .iter()
                .zip(u)
                .map(|(s, &t)| s.project(s.lower + t * s.width()))
                .collect(),
        ))
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterVector {
        ParameterVector(
            self.specs
                .iter()
                .map(|s| match s.kind {
                    ParamKind::Continuous => s.lower + rng.random::<f64>() * s.width(),
                    ParamKind::IntegerDays => {
                        rng.random_range(s.lower as i64..=s.upper as i64) as f64
                    }
                })
                .collect(),
        )
    }

    pub fn clamp(&self, v: &[f64]) -> Result<ParameterVector> {
        check_dim(self.dim(), v.len())?;
        Ok(ParameterVector(
            self.specs.iter().zip(v).map(|(s, &x)| s.project(x)).collect(),
        ))
    }

    /// Adds `Normal(0, sigma_i^2)` noise to every masked coordinate and clamps.
    ///
    /// An all-false mask returns the clamped centre.
    pub fn perturb_gaussian<R: Rng + ?Sized>(
        &self,
        center: &[f64],
        sigma: &[f64],
        mask: &[bool],
        rng: &mut R,
    ) -> Result<ParameterVector> {
        check_dim(self.dim(), center.len())?;
        check_dim(self.dim(), sigma.len())?;
        check_dim(self.dim(), mask.len())?;
        let raw: Vec<f64> = center
            .iter()
            .zip(sigma)
            .zip(mask)
            .map(|((&c, &s), &m)| if m { c + s * standard_normal(rng) } else { c })
            .collect();
        self.clamp(&raw)
    }

    /// Coordinate-subset perturbation: as [`Self::perturb_gaussian`], but an
    /// empty mask is a contract violation.
    pub fn perturb_coordinates<R: Rng + ?Sized>(
        &self,
        center: &[f64],
        sigma: &[f64],
        mask: &[bool],
        rng: &mut R,
    ) -> Result<ParameterVector> {
        if !mask.iter().any(|&m| m) {
            return Err(Error::Contract("coordinate perturbation needs at least one masked coordinate"));
        }
        self.perturb_gaussian(center, sigma, mask, rng)
    }

    /// Range-normalised Euclidean distance.
    pub fn standardized_l2(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dim(self.dim(), a.len())?;
        check_dim(self.dim(), b.len())?;
        let sum: f64 = self
            .specs
            .iter()
            .zip(a.iter().zip(b))
            .map(|(s, (&x, &y))| {
                let t = (x - y) / s.width();
                t * t
            })
            .sum();
        Ok(libm::sqrt(sum))
    }
}

/// A point of a [`ParameterSpace`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for ParameterVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use alloc::vec;
    use proptest::prelude::*;

    fn unit() -> ParameterSpace {
        ParameterSpace::new(vec![ParameterSpec::continuous("x", 0.0, 1.0).unwrap()]).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ParameterSpec::continuous("a", 1.0, 1.0).is_err());
        assert!(ParameterSpec::integer_days("a", 0.0, 40.5).is_err());
        assert!(ParameterSpace::new(vec![]).is_err());
        let a = ParameterSpec::continuous("a", 0.0, 1.0).unwrap();
        assert!(ParameterSpace::new(vec![a.clone(), a]).is_err());
    }

    #[test]
    fn epidemic_space_rows() {
        let s = ParameterSpace::epidemic();
        assert_eq!(s.dim(), 7);
        assert_eq!(s.specs()[6].upper, 0.022);
        assert_eq!(s.specs()[3].kind, ParamKind::IntegerDays);
        assert_eq!(s.specs()[4].kind, ParamKind::IntegerDays);
        assert_eq!(s.specs()[3].upper, 41.0);
    }

    #[test]
    fn sample_uniform_in_range() {
        let s = ParameterSpace::epidemic();
        let u = unit();
        for seed in 0..200 {
            let mut rng = stream(seed);
            let v = s.sample_uniform(&mut rng);
            assert!(s.contains(&v));
            assert!(v[6] >= 0.0 && v[6] <= 0.022);
            let w = u.sample_uniform(&mut rng);
            assert!((0.0..=1.0).contains(&w[0]));
        }
    }

    #[test]
    fn sample_uniform_mean() {
        let s = ParameterSpace::epidemic();
        let mut rng = stream(11);
        let n = 100_000;
        let mean = (0..n).map(|_| s.sample_uniform(&mut rng)[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn clamp_examples() {
        let s = ParameterSpace::epidemic();
        let inside = vec![0.2, 0.3, 0.1, 10.0, 5.0, 0.4, 0.01];
        assert_eq!(s.clamp(&inside).unwrap().0, inside);
        let mut v = inside.clone();
        v[0] = 1.7;
        v[3] = 18.4;
        let c = s.clamp(&v).unwrap();
        assert_eq!(c[0], 1.0);
        assert_eq!(c[3], 18.0);
        assert!(matches!(s.clamp(&[0.1]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn perturb_degenerate_cases() {
        let s = ParameterSpace::epidemic();
        let mut rng = stream(1);
        let center = vec![0.2, 0.3, 0.1, 10.0, 5.0, 0.4, 0.01];
        let zero = vec![0.0; 7];
        let all = vec![true; 7];
        let none = vec![false; 7];
        let p = s.perturb_gaussian(&center, &zero, &all, &mut rng).unwrap();
        assert_eq!(p, s.clamp(&center).unwrap());
        let sig = vec![0.5; 7];
        let p = s.perturb_gaussian(&center, &sig, &none, &mut rng).unwrap();
        assert_eq!(p.0, center);
        assert!(matches!(
            s.perturb_coordinates(&center, &sig, &none, &mut rng),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn perturb_std_matches_sigma() {
        // wide box so clamping never triggers; the sample std is the pre-clamp std
        let s = ParameterSpace::new(vec![ParameterSpec::continuous("x", -10.0, 10.0).unwrap()])
            .unwrap();
        let mut rng = stream(5);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| s.perturb_gaussian(&[0.0], &[0.1], &[true], &mut rng).unwrap()[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = libm::sqrt(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64);
        assert!((sd - 0.1).abs() < 0.005, "{sd}");
    }

    #[test]
    fn tiny_sigma_converges_to_clamped_center() {
        let s = ParameterSpace::epidemic();
        let mut rng = stream(9);
        let center = vec![0.2, 0.3, 0.1, 10.0, 5.0, 0.4, 0.01];
        let p = s
            .perturb_gaussian(&center, &[1e-12; 7], &[true; 7], &mut rng)
            .unwrap();
        for (a, b) in p.iter().zip(&center) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn standardized_l2_examples() {
        let s = ParameterSpace::epidemic();
        let a = vec![0.2, 0.3, 0.1, 10.0, 5.0, 0.4, 0.01];
        assert_eq!(s.standardized_l2(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b[1] = 1.3;
        assert!((s.standardized_l2(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        let mut c = a.clone();
        c[0] += 0.5;
        c[3] += 20.5;
        assert!((s.standardized_l2(&a, &c).unwrap() - 0.70711).abs() < 1e-5);
        assert!(s.standardized_l2(&a, &[0.0]).is_err());
    }

    fn vec7() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-50.0f64..50.0, 7)
    }

    proptest! {
        #[test]
        fn clamp_and_perturb_stay_in_box(seed in any::<u64>(), v in vec7()) {
            let s = ParameterSpace::epidemic();
            let mut rng = stream(seed);
            prop_assert!(s.contains(&s.clamp(&v).unwrap()));
            let c = s.sample_uniform(&mut rng);
            let sig: Vec<f64> = s.specs().iter().map(|p| 0.3 * p.width()).collect();
            let p = s.perturb_gaussian(&c, &sig, &[true; 7], &mut rng).unwrap();
            prop_assert!(s.contains(&p));
            prop_assert!(s.contains(&s.from_unit(&[0.5; 7]).unwrap()));
        }

        #[test]
        fn standardized_l2_is_a_metric(seed in any::<u64>()) {
            let s = ParameterSpace::epidemic();
            let mut rng = stream(seed);
            let a = s.sample_uniform(&mut rng);
            let b = s.sample_uniform(&mut rng);
            let c = s.sample_uniform(&mut rng);
            let ab = s.standardized_l2(&a, &b).unwrap();
            let ba = s.standardized_l2(&b, &a).unwrap();
            let bc = s.standardized_l2(&b, &c).unwrap();
            let ac = s.standardized_l2(&a, &c).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert_eq!(ab == 0.0, a == b);
        }
    }
}
