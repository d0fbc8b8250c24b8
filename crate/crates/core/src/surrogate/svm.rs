//! RBF-kernel support vector machines trained by sequential minimal
//! optimisation with second-order working-set selection.
//!
//! Both variants reduce to the same dual problem
//! `min 1/2 a'Qa + p'a  s.t.  y'a = 0, 0 <= a_i <= C`
//! with `Q_ij = y_i y_j K(x_i, x_j)`. Classification uses `p = -1`; the
//! epsilon-insensitive regression doubles the variables.

use alloc::vec;
use alloc::vec::Vec;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// RBF width; `None` means `1 / n_features`.
    pub gamma: Option<f64>,
    /// Tube half-width of the regression variant.
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            epsilon: 0.001,
            tolerance: 1e-3,
            max_iterations: 1_000_000,
        }
    }
}

#[inline]
fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    libm::exp(-gamma * d2)
}

/// Dual solution of one problem.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

struct Solver<'a> {
    kernel: &'a [f64],
    n: usize,
    y: Vec<f64>,
    c: f64,
}

impl Solver<'_> {
    #[inline]
    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.kernel[(i % self.n) * self.n + (j % self.n)]
    }

    fn solve(&self, p: &[f64], tolerance: f64, max_iterations: usize) -> DualSolution {
        let m = self.y.len();
        let c = self.c;
        let y = &self.y;
        let mut alpha = vec![0.0; m];
        let mut grad = p.to_vec();
        let qd: Vec<f64> = (0..m).map(|i| self.q(i, i)).collect();
        let upper = |a: f64| a >= c;
        let lower = |a: f64| a <= 0.0;
        let mut iterations = 0;
        let mut qi = vec![0.0; m];
        let mut qj = vec![0.0; m];
        while iterations < max_iterations {
            let mut gmax = f64::NEG_INFINITY;
            let mut gmax_idx = usize::MAX;
            for t in 0..m {
                let v = -y[t] * grad[t];
                let free = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
                if free && v >= gmax {
                    gmax = v;
                    gmax_idx = t;
                }
            }
            if gmax_idx == usize::MAX {
                break;
            }
            let i = gmax_idx;
            for (t, q) in qi.iter_mut().enumerate() {
                *q = self.q(i, t);
            }
            let mut gmax2 = f64::NEG_INFINITY;
            let mut gmin_idx = usize::MAX;
            let mut obj_min = f64::INFINITY;
            for t in 0..m {
                let (eligible, grad_diff, yg, quad) = if y[t] > 0.0 {
                    (!lower(alpha[t]), gmax + grad[t], grad[t], qd[i] + qd[t] - 2.0 * y[i] * qi[t])
                } else {
                    (!upper(alpha[t]), gmax - grad[t], -grad[t], qd[i] + qd[t] + 2.0 * y[i] * qi[t])
                };
                if !eligible {
                    continue;
                }
                gmax2 = gmax2.max(yg);
                if grad_diff > 0.0 {
                    let quad = if quad > 0.0 { quad } else { TAU };
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        gmin_idx = t;
                    }
                }
            }
            if gmax + gmax2 < tolerance || gmin_idx == usize::MAX {
                break;
            }
            let j = gmin_idx;
            for (t, q) in qj.iter_mut().enumerate() {
                *q = self.q(j, t);
            }
            iterations += 1;
            let (old_i, old_j) = (alpha[i], alpha[j]);
            if y[i] != y[j] {
                let quad = qd[i] + qd[j] + 2.0 * qi[j];
                let quad = if quad > 0.0 { quad } else { TAU };
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = qd[i] + qd[j] - 2.0 * qi[j];
                let quad = if quad > 0.0 { quad } else { TAU };
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = sum;
                    }
                    if alpha[i] < 0.0 {
                        alpha[i] = 0.0;
                        alpha[j] = sum;
                    }
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..m {
                grad[t] += qi[t] * di + qj[t] * dj;
            }
        }

        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut free_count = 0usize;
        for t in 0..m {
            let yg = y[t] * grad[t];
            if upper(alpha[t]) {
                if y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if lower(alpha[t]) {
                if y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free_count += 1;
                free_sum += yg;
            }
        }
        let rho = if free_count > 0 {
            free_sum / free_count as f64
        } else {
            0.5 * (ub + lb)
        };
        DualSolution {
            alpha,
            y: y.clone(),
            rho,
            iterations,
        }
    }
}

/// A trained kernel expansion `f(x) = sum_i coef_i K(sv_i, x) - rho`.
#[derive(Debug, Clone)]
pub struct SvmModel {
    support: Vec<Vec<f64>>,
    coef: Vec<f64>,
    rho: f64,
    gamma: f64,
    /// The raw dual solution, kept for constraint checks.
    pub dual: DualSolution,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * rbf(self.gamma, s, x))
            .sum::<f64>()
            - self.rho
    }

    pub fn n_support(&self) -> usize {
        self.support.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Soft-margin classifier; `labels` are `true` for the positive class.
    pub fn fit_classifier(x: &[Vec<f64>], labels: &[bool], params: SvmParams) -> Self {
        let n = x.len();
        let gamma = params.gamma.unwrap_or(1.0 / x[0].len().max(1) as f64);
        let kernel = gram(x, gamma);
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let solver = Solver {
            kernel: &kernel,
            n,
            y,
            c: params.c,
        };
        let dual = solver.solve(&vec![-1.0; n], params.tolerance, params.max_iterations);
        let coef: Vec<f64> = dual.alpha.iter().zip(&dual.y).map(|(a, y)| a * y).collect();
        Self::assemble(x, coef, dual, gamma)
    }

    /// Epsilon-insensitive support vector regression.
    pub fn fit_regressor(x: &[Vec<f64>], targets: &[f64], params: SvmParams) -> Self {
        let n = x.len();
        let gamma = params.gamma.unwrap_or(1.0 / x[0].len().max(1) as f64);
        let kernel = gram(x, gamma);
        let mut y = vec![1.0; 2 * n];
        y[n..].fill(-1.0);
        let mut p = Vec::with_capacity(2 * n);
        p.extend(targets.iter().map(|z| params.epsilon - z));
        p.extend(targets.iter().map(|z| params.epsilon + z));
        let solver = Solver {
            kernel: &kernel,
            n,
            y,
            c: params.c,
        };
        let dual = solver.solve(&p, params.tolerance, params.max_iterations);
        let coef: Vec<f64> = (0..n).map(|i| dual.alpha[i] - dual.alpha[i + n]).collect();
        Self::assemble(x, coef, dual, gamma)
    }

    fn assemble(x: &[Vec<f64>], coef: Vec<f64>, dual: DualSolution, gamma: f64) -> Self {
        let (support, coef): (Vec<_>, Vec<_>) = x
            .iter()
            .zip(coef)
            .filter(|(_, c)| *c != 0.0)
            .map(|(s, c)| (s.clone(), c))
            .unzip();
        Self {
            support,
            coef,
            rho: dual.rho,
            gamma,
            dual,
        }
    }
}

fn gram(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(gamma, &x[i], &x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn check_dual(m: &SvmModel, c: f64) {
        let balance: f64 = m.dual.alpha.iter().zip(&m.dual.y).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-6, "sum a_i y_i = {balance}");
        for &a in &m.dual.alpha {
            assert!((-1e-12..=c + 1e-12).contains(&a));
        }
    }

    #[test]
    fn classifier_separates_clusters() {
        let mut rng = stream(2);
        let mut x = Vec::new();
        let mut l = Vec::new();
        for i in 0..80 {
            let pos = i % 2 == 0;
            let c = if pos { 0.8 } else { 0.2 };
            x.push(vec![c + 0.1 * (rng.random::<f64>() - 0.5), c + 0.1 * (rng.random::<f64>() - 0.5)]);
            l.push(pos);
        }
        let m = SvmModel::fit_classifier(&x, &l, SvmParams::default());
        check_dual(&m, 1.0);
        for (xi, &li) in x.iter().zip(&l) {
            assert_eq!(m.decision(xi) >= 0.0, li);
        }
    }

    #[test]
    fn regressor_fits_smooth_function() {
        let x: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64 / 59.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 0.3 + 0.2 * r[0]).collect();
        let m = SvmModel::fit_regressor(&x, &y, SvmParams::default());
        check_dual(&m, 1.0);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((m.decision(xi) - yi).abs() < 0.01);
        }
    }

    #[test]
    fn noisy_labels_respect_box() {
        let mut rng = stream(8);
        let x: Vec<Vec<f64>> = (0..120).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let l: Vec<bool> = (0..120).map(|_| rng.random::<bool>()).collect();
        let m = SvmModel::fit_classifier(&x, &l, SvmParams::default());
        check_dual(&m, 1.0);
        assert!(m.n_support() > 0);
    }
}
