//! CART decision trees (Gini for labels, variance reduction for values).

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A binary tree stored as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Targets are 0/1; leaves hold the positive fraction.
    Gini,
    /// Leaves hold the mean target.
    Variance,
}

#[derive(Default, Clone, Copy)]
struct Stats {
    n: f64,
    sum: f64,
    sumsq: f64,
}

impl Stats {
    fn add(&mut self, y: f64) {
        self.n += 1.0;
        self.sum += y;
        self.sumsq += y * y;
    }

    fn sub(&mut self, y: f64) {
        self.n -= 1.0;
        self.sum -= y;
        self.sumsq -= y * y;
    }

    /// Node impurity weighted by its size.
    fn weighted_impurity(&self, criterion: Criterion) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        match criterion {
            Criterion::Gini => {
                let p = self.sum / self.n;
                self.n * (1.0 - p * p - (1.0 - p) * (1.0 - p))
            }
            Criterion::Variance => (self.sumsq - self.sum * self.sum / self.n).max(0.0),
        }
    }
}

pub(crate) struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub score: f64,
}

/// Scans every feature of `rows` for the threshold maximising `score`.
///
/// `score(left, right)` receives the accumulated statistics of both sides
/// and is only called when each side satisfies `admissible`.
pub(crate) fn best_split<S: Copy + Default>(
    x: &[Vec<f64>],
    rows: &[usize],
    accumulate: impl Fn(&mut S, usize, f64),
    total: S,
    admissible: impl Fn(&S, &S) -> bool,
    score: impl Fn(&S, &S) -> f64,
) -> Option<SplitCandidate> {
    let d = x.first().map_or(0, Vec::len);
    let mut best: Option<SplitCandidate> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for f in 0..d {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left = S::default();
        let mut right = total;
        for w in 0..order.len().saturating_sub(1) {
            let r = order[w];
            accumulate(&mut left, r, 1.0);
            accumulate(&mut right, r, -1.0);
            let (lo, hi) = (x[r][f], x[order[w + 1]][f]);
            if lo == hi || !admissible(&left, &right) {
                continue;
            }
            let s = score(&left, &right);
            if best.as_ref().is_none_or(|b| s > b.score) {
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: 0.5 * (lo + hi),
                    score: s,
                });
            }
        }
    }
    best
}

pub(crate) fn partition(x: &[Vec<f64>], rows: &[usize], feature: usize, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    rows.iter().partition(|&&r| x[r][feature] <= threshold)
}

impl Tree {
    pub fn fit(x: &[Vec<f64>], y: &[f64], criterion: Criterion, params: TreeParams) -> Self {
        let mut tree = Tree { nodes: Vec::new() };
        let rows: Vec<usize> = (0..y.len()).collect();
        tree.grow(x, y, &rows, 0, criterion, params);
        tree
    }

    fn grow(
        &mut self,
        x: &[Vec<f64>],
        y: &[f64],
        rows: &[usize],
        depth: usize,
        criterion: Criterion,
        params: TreeParams,
    ) -> usize {
        let id = self.nodes.len();
        let mut total = Stats::default();
        for &r in rows {
            total.add(y[r]);
        }
        let value = if total.n > 0.0 { total.sum / total.n } else { 0.0 };
        self.nodes.push(Node::Leaf(value));
        let parent = total.weighted_impurity(criterion);
        if depth >= params.max_depth || rows.len() < 2 * params.min_leaf || parent <= 1e-12 {
            return id;
        }
        let min_leaf = params.min_leaf as f64;
        let split = best_split(
            x,
            rows,
            |s: &mut Stats, r, sign| {
                if sign > 0.0 {
                    s.add(y[r])
                } else {
                    s.sub(y[r])
                }
            },
            total,
            |l, r| l.n >= min_leaf && r.n >= min_leaf,
            |l, r| parent - l.weighted_impurity(criterion) - r.weighted_impurity(criterion),
        );
        let Some(split) = split.filter(|s| s.score > 1e-12) else {
            return id;
        };
        let (lrows, rrows) = partition(x, rows, split.feature, split.threshold);
        let left = self.grow(x, y, &lrows, depth + 1, criterion, params);
        let right = self.grow(x, y, &rrows, depth + 1, criterion, params);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}
