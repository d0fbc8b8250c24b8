//! (mu/mu_w, lambda) covariance matrix adaptation in unit coordinates.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::standard_normal;

/// Smallest eigenvalue accepted before the covariance is reset.
pub const MIN_EIGENVALUE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CmaEs {
    dim: usize,
    lambda: usize,
    weights: Vec<f64>,
    mueff: f64,
    cs: f64,
    damps: f64,
    cc: f64,
    c1: f64,
    cmu: f64,
    chi_n: f64,
    mean: Vec<f64>,
    sigma: f64,
    c: Matrix,
    b: Matrix,
    d: Vec<f64>,
    pc: Vec<f64>,
    ps: Vec<f64>,
    generation: usize,
    resets: usize,
}

impl CmaEs {
    pub const INITIAL_SIGMA: f64 = 0.3;

    /// Starts at the centre of the unit box with identity covariance.
    pub fn new(dim: usize, lambda: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("evolution strategy needs at least one dimension".into()));
        }
        if lambda < 2 {
            return Err(Error::Config("evolution strategy needs at least two offspring".into()));
        }
        let weights = recombination_weights(lambda / 2);
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let n = dim as f64;
        let cs = (mueff + 2.0) / (n + mueff + 5.0);
        let damps = 1.0 + 2.0 * (libm::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0).max(0.0) + cs;
        let cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
        let c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) * (n + 2.0) + mueff));
        let chi_n = libm::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Ok(Self {
            dim,
            lambda,
            weights,
            mueff,
            cs,
            damps,
            cc,
            c1,
            cmu,
            chi_n,
            mean: vec![0.5; dim],
            sigma: Self::INITIAL_SIGMA,
            c: Matrix::identity(dim),
            b: Matrix::identity(dim),
            d: vec![1.0; dim],
            pc: vec![0.0; dim],
            ps: vec![0.0; dim],
            generation: 0,
            resets: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn mu(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &Matrix {
        &self.c
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// How often the covariance lost definiteness and was reset.
    pub fn resets(&self) -> usize {
        self.resets
    }

    /// Draws `lambda` offspring, clamped to the unit box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        (0..self.lambda)
            .map(|_| {
                let z: Vec<f64> = (0..self.dim).map(|i| self.d[i] * standard_normal(rng)).collect();
                let y = self.b.mul_vec(&z);
                self.mean
                    .iter()
                    .zip(&y)
                    .map(|(m, y)| (m + self.sigma * y).clamp(0.0, 1.0))
                    .collect()
            })
            .collect()
    }

    /// Updates the distribution from offspring ranked best first.
    pub fn tell(&mut self, ranked: &[Vec<f64>]) -> Result<()> {
        let mu = self.mu();
        if ranked.len() < mu {
            return Err(Error::InsufficientData(alloc::format!(
                "{} ranked offspring for {mu} parents",
                ranked.len()
            )));
        }
        for x in ranked {
            crate::error::check_dim(self.dim, x.len())?;
        }
        let n = self.dim;
        let old = self.mean.clone();
        self.mean = recombine(&ranked[..mu], &self.weights);
        let steps: Vec<Vec<f64>> = ranked[..mu]
            .iter()
            .map(|x| x.iter().zip(&old).map(|(x, m)| (x - m) / self.sigma).collect())
            .collect();
        let yw: Vec<f64> = (0..n).map(|i| (self.mean[i] - old[i]) / self.sigma).collect();

        let whitened = self.inverse_sqrt_mul(&yw);
        let ks = libm::sqrt(self.cs * (2.0 - self.cs) * self.mueff);
        for i in 0..n {
            self.ps[i] = (1.0 - self.cs) * self.ps[i] + ks * whitened[i];
        }
        let ps_norm = norm(&self.ps);
        let g = (self.generation + 1) as f64;
        let hsig_denominator = libm::sqrt(1.0 - libm::pow(1.0 - self.cs, 2.0 * g));
        let hsig = ps_norm / hsig_denominator / self.chi_n < 1.4 + 2.0 / (n as f64 + 1.0);
        let kc = libm::sqrt(self.cc * (2.0 - self.cc) * self.mueff);
        for i in 0..n {
            self.pc[i] = (1.0 - self.cc) * self.pc[i] + if hsig { kc * yw[i] } else { 0.0 };
        }

        let correction = if hsig { 0.0 } else { self.cc * (2.0 - self.cc) };
        let keep = 1.0 - self.c1 - self.cmu;
        for i in 0..n {
            for j in 0..=i {
                let rank_one = self.pc[i] * self.pc[j] + correction * self.c[(i, j)];
                let rank_mu: f64 = steps
                    .iter()
                    .zip(&self.weights)
                    .map(|(y, w)| w * y[i] * y[j])
                    .sum();
                let v = keep * self.c[(i, j)] + self.c1 * rank_one + self.cmu * rank_mu;
                self.c[(i, j)] = v;
                self.c[(j, i)] = v;
            }
        }
        self.sigma *= libm::exp((self.cs / self.damps) * (ps_norm / self.chi_n - 1.0));
        self.generation += 1;
        self.decompose();
        Ok(())
    }

    /// One generation scored by `fitness` (lower is better). Returns all
    /// offspring sorted by fitness, the elites first; ties keep draw order.
    pub fn step<R, F>(&mut self, mut fitness: F, rng: &mut R) -> Result<Vec<Vec<f64>>>
    where
        R: Rng + ?Sized,
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let offspring = self.sample(rng);
        let scores = offspring.iter().map(|x| fitness(x)).collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..offspring.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let ranked: Vec<Vec<f64>> = order.into_iter().map(|i| offspring[i].clone()).collect();
        self.tell(&ranked)?;
        Ok(ranked)
    }

    fn decompose(&mut self) {
        let (values, vectors) = self.c.symmetric_eigen();
        let healthy = self.c.is_symmetric(1e-12)
            && values.iter().all(|v| v.is_finite() && *v > MIN_EIGENVALUE)
            && self.sigma.is_finite()
            && self.sigma > 0.0;
        if !healthy {
            self.c = Matrix::identity(self.dim);
            self.b = Matrix::identity(self.dim);
            self.d = vec![1.0; self.dim];
            self.pc = vec![0.0; self.dim];
            self.ps = vec![0.0; self.dim];
            if !(self.sigma.is_finite() && self.sigma > 0.0) {
                self.sigma = Self::INITIAL_SIGMA;
            }
            self.resets += 1;
            return;
        }
        self.b = vectors;
        self.d = values.iter().map(|v| libm::sqrt(*v)).collect();
    }

    fn inverse_sqrt_mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let projected: Vec<f64> = (0..n)
            .map(|k| (0..n).map(|i| self.b[(i, k)] * v[i]).sum::<f64>() / self.d[k])
            .collect();
        self.b.mul_vec(&projected)
    }
}

/// Logarithmic weights for `mu` parents, normalised to sum to one.
pub fn recombination_weights(mu: usize) -> Vec<f64> {
    let mu = mu.max(1);
    let raw: Vec<f64> = (1..=mu)
        .map(|i| libm::log(mu as f64 + 0.5) - libm::log(i as f64))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Weighted mean of `points`.
pub fn recombine(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let dim = points.first().map_or(0, Vec::len);
    (0..dim)
        .map(|i| points.iter().zip(weights).map(|(p, w)| w * p[i]).sum())
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}
