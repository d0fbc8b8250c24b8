//! Second-order gradient boosted regression trees.

use alloc::vec::Vec;

use super::tree::{best_split, partition, Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Squared,
    /// Targets are 0/1, raw scores are log-odds.
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 4,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Booster {
    loss: Loss,
    base: f64,
    trees: Vec<Tree>,
    /// Mean training loss before the first tree and after each round.
    pub loss_trace: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

fn mean_loss(loss: Loss, raw: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let total: f64 = raw
        .iter()
        .zip(y)
        .map(|(&f, &t)| match loss {
            Loss::Squared => 0.5 * (f - t) * (f - t),
            // log(1 + e^f) - t f, computed stably
            Loss::Logistic => f.max(0.0) + libm::log1p(libm::exp(-f.abs())) - t * f,
        })
        .sum();
    total / n
}

#[derive(Default, Clone, Copy)]
struct GradStats {
    g: f64,
    h: f64,
}

impl Booster {
    pub fn fit(x: &[Vec<f64>], y: &[f64], loss: Loss, params: BoostParams) -> Self {
        let n = y.len();
        let mean = y.iter().sum::<f64>() / n as f64;
        let base = match loss {
            Loss::Squared => mean,
            Loss::Logistic => {
                let p = mean.clamp(1e-6, 1.0 - 1e-6);
                libm::log(p / (1.0 - p))
            }
        };
        let mut raw = alloc::vec![base; n];
        let mut booster = Self {
            loss,
            base,
            trees: Vec::with_capacity(params.n_trees),
            loss_trace: alloc::vec![mean_loss(loss, &raw, y)],
        };
        let rows: Vec<usize> = (0..n).collect();
        let mut grad = alloc::vec![0.0; n];
        let mut hess = alloc::vec![0.0; n];
        for _ in 0..params.n_trees {
            for i in 0..n {
                let (g, h) = match loss {
                    Loss::Squared => (raw[i] - y[i], 1.0),
                    Loss::Logistic => {
                        let p = sigmoid(raw[i]);
                        (p - y[i], (p * (1.0 - p)).max(1e-16))
                    }
                };
                grad[i] = g;
                hess[i] = h;
            }
            let mut tree = Tree { nodes: Vec::new() };
            grow(&mut tree, x, &grad, &hess, &rows, 0, &params);
            for (i, r) in raw.iter_mut().enumerate() {
                *r += tree.predict(&x[i]);
            }
            booster.trees.push(tree);
            booster.loss_trace.push(mean_loss(loss, &raw, y));
        }
        booster
    }

    /// Raw additive score (a value for squared loss, log-odds for logistic).
    pub fn raw(&self, x: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.loss {
            Loss::Squared => self.raw(x),
            Loss::Logistic => sigmoid(self.raw(x)),
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

fn grow(
    tree: &mut Tree,
    x: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    depth: usize,
    params: &BoostParams,
) -> usize {
    let id = tree.nodes.len();
    let total = rows.iter().fold(GradStats::default(), |s, &r| GradStats {
        g: s.g + grad[r],
        h: s.h + hess[r],
    });
    let lambda = params.lambda;
    let weight = -total.g / (total.h + lambda) * params.learning_rate;
    tree.nodes.push(Node::Leaf(weight));
    if depth >= params.max_depth || rows.len() < 2 {
        return id;
    }
    let parent = total.g * total.g / (total.h + lambda);
    let split = best_split(
        x,
        rows,
        |s: &mut GradStats, r, sign| {
            s.g += sign * grad[r];
            s.h += sign * hess[r];
        },
        total,
        |l, r| l.h >= params.min_child_weight && r.h >= params.min_child_weight,
        |l, r| l.g * l.g / (l.h + lambda) + r.g * r.g / (r.h + lambda) - parent,
    );
    let Some(split) = split.filter(|s| s.score > 1e-12) else {
        return id;
    };
    let (lrows, rrows) = partition(x, rows, split.feature, split.threshold);
    let left = grow(tree, x, grad, hess, &lrows, depth + 1, params);
    let right = grow(tree, x, grad, hess, &rrows, depth + 1, params);
    tree.nodes[id] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn squared_loss_trace_is_monotone() {
        let x: Vec<Vec<f64>> = (0..150).map(|i| vec![(i as f64 * 0.618) % 1.0, i as f64 / 150.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| libm::cos(6.0 * r[0]) * r[1]).collect();
        let b = Booster::fit(&x, &y, Loss::Squared, BoostParams::default());
        assert_eq!(b.n_trees(), 100);
        for w in b.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn logistic_trace_is_monotone_and_separates() {
        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0]).collect();
        let y: Vec<f64> = (0..100).map(|i| if i >= 60 { 1.0 } else { 0.0 }).collect();
        let b = Booster::fit(&x, &y, Loss::Logistic, BoostParams::default());
        for w in b.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(b.predict(&[0.9]) > 0.5);
        assert!(b.predict(&[0.1]) < 0.5);
    }

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 30.0]).collect();
        let y = vec![0.37; 30];
        let b = Booster::fit(&x, &y, Loss::Squared, BoostParams::default());
        assert!((b.predict(&[0.123]) - 0.37).abs() < 1e-6);
    }
}
