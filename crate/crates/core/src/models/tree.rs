//! CART machinery shared by the single tree, the random forest and the
//! boosted ensemble: greedy binary splits with deterministic tie-breaking
//! (lowest feature index, then lowest threshold).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Matrix, ModelSpec};

#[derive(Clone, Debug)]
pub(super) enum Node {
    Leaf(u8),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub(super) fn predict_row(&self, row: &[f64]) -> u8 {
        match self {
            Node::Leaf(label) => *label,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict_row(row)
                } else {
                    right.predict_row(row)
                }
            }
        }
    }
}

/// A single Gini-impurity classification tree.
#[derive(Clone, Debug)]
pub struct CartModel {
    root: Node,
    n_features: usize,
    importances: Vec<f64>,
}

impl CartModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Total weighted Gini decrease attributed to each feature.
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        self.root.predict_row(row)
    }
}

fn gini(c0: usize, c1: usize) -> f64 {
    let n = (c0 + c1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = c0 as f64 / n;
    let p1 = c1 as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

/// Which features a split may consider.
pub(super) enum FeatureSampling<'r> {
    All,
    /// Draw `m` distinct features per split from the tree's RNG stream.
    Subsample { m: usize, rng: &'r mut ChaCha8Rng },
}

impl FeatureSampling<'_> {
    fn draw(&mut self, d: usize) -> Vec<usize> {
        match self {
            FeatureSampling::All => (0..d).collect(),
            FeatureSampling::Subsample { m, rng } => {
                let m = (*m).min(d);
                let mut pool: Vec<usize> = (0..d).collect();
                for i in 0..m {
                    let j = rng.random_range(i..d);
                    pool.swap(i, j);
                }
                let mut chosen = pool[..m].to_vec();
                chosen.sort_unstable();
                chosen
            }
        }
    }
}

struct ClassifierBuilder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    max_depth: Option<usize>,
    n_total: f64,
    importances: Vec<f64>,
}

impl ClassifierBuilder<'_> {
    fn majority(&self, rows: &[usize]) -> u8 {
        let ones = rows.iter().filter(|&&r| self.y[r] == 1).count();
        // ties go to class 0
        u8::from(2 * ones > rows.len())
    }

    /// Best `(feature, threshold, weighted_impurity)` over the candidate
    /// features, or None when every candidate is constant on `rows`.
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<(usize, f64, f64)> {
        let n = rows.len() as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut vals: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
        for &f in features {
            vals.clear();
            vals.extend(rows.iter().map(|&r| (self.x.row(r)[f], self.y[r])));
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let total1 = vals.iter().filter(|&&(_, l)| l == 1).count();
            let total0 = vals.len() - total1;
            let mut left0 = 0usize;
            let mut left1 = 0usize;
            for i in 1..vals.len() {
                let (prev, label) = vals[i - 1];
                if label == 1 {
                    left1 += 1;
                } else {
                    left0 += 1;
                }
                let next = vals[i].0;
                if next <= prev {
                    continue;
                }
                let threshold = (prev + next) / 2.0;
                // adjacent floats can round the midpoint onto an endpoint,
                // which would desynchronize the prefix counts
                if !(threshold > prev && threshold < next) {
                    continue;
                }
                let nl = (left0 + left1) as f64;
                let nr = n - nl;
                let weighted =
                    (nl * gini(left0, left1) + nr * gini(total0 - left0, total1 - left1)) / n;
                if best.is_none_or(|(_, _, w)| weighted < w) {
                    best = Some((f, threshold, weighted));
                }
            }
        }
        best
    }

    fn build(&mut self, rows: &[usize], depth: usize, sampling: &mut FeatureSampling) -> Node {
        let ones = rows.iter().filter(|&&r| self.y[r] == 1).count();
        if ones == 0 {
            return Node::Leaf(0);
        }
        if ones == rows.len() {
            return Node::Leaf(1);
        }
        if self.max_depth.is_some_and(|cap| depth >= cap) {
            return Node::Leaf(self.majority(rows));
        }
        let features = sampling.draw(self.x.n_cols());
        let Some((feature, threshold, weighted)) = self.best_split(rows, &features) else {
            return Node::Leaf(self.majority(rows));
        };
        let node_impurity = gini(rows.len() - ones, ones);
        self.importances[feature] +=
            rows.len() as f64 / self.n_total * (node_impurity - weighted);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x.row(r)[feature] <= threshold);
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());
        let left = Box::new(self.build(&left_rows, depth + 1, sampling));
        let right = Box::new(self.build(&right_rows, depth + 1, sampling));
        Node::Split {
            feature,
            threshold,
            left,
            right,
        }
    }
}

/// Grows one classification tree over `rows`. Splits are taken whenever the
/// node is impure and any feature still separates it, even at zero Gini gain
/// (a depth cap is the only regularizer), so a depth-unlimited tree on
/// distinct rows memorizes them exactly.
pub(super) fn grow_classifier_tree(
    x: &Matrix,
    y: &[u8],
    rows: &[usize],
    max_depth: Option<usize>,
    sampling: &mut FeatureSampling,
) -> (Node, Vec<f64>) {
    let mut builder = ClassifierBuilder {
        x,
        y,
        max_depth,
        n_total: rows.len() as f64,
        importances: vec![0.0; x.n_cols()],
    };
    let root = builder.build(rows, 0, sampling);
    (root, builder.importances)
}

pub(super) fn fit_cart(spec: &ModelSpec, x: &Matrix, y: &[u8]) -> CartModel {
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let (root, importances) =
        grow_classifier_tree(x, y, &rows, spec.hyper.max_depth, &mut FeatureSampling::All);
    CartModel {
        root,
        n_features: x.n_cols(),
        importances,
    }
}

#[derive(Clone, Debug)]
pub(super) enum RegNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<RegNode>,
        right: Box<RegNode>,
    },
}

impl RegNode {
    pub(super) fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            RegNode::Leaf(v) => *v,
            RegNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict_row(row)
                } else {
                    right.predict_row(row)
                }
            }
        }
    }
}

const MIN_HESSIAN: f64 = 1e-12;
const MIN_GAIN: f64 = 1e-12;

/// Grows a regression tree on gradient/hessian pairs; leaves hold the
/// one-step Newton value `sum(grad) / sum(hess)`.
pub(super) fn grow_regression_tree(
    x: &Matrix,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    max_depth: Option<usize>,
    depth: usize,
) -> RegNode {
    let leaf = |rows: &[usize]| {
        let g: f64 = rows.iter().map(|&r| grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| hess[r]).sum();
        RegNode::Leaf(g / h.max(MIN_HESSIAN))
    };
    if rows.len() < 2 || max_depth.is_some_and(|cap| depth >= cap) {
        return leaf(rows);
    }
    let n = rows.len() as f64;
    let total_g: f64 = rows.iter().map(|&r| grad[r]).sum();
    let base = total_g * total_g / n;
    let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, gain)
    let mut vals: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
    for f in 0..x.n_cols() {
        vals.clear();
        vals.extend(rows.iter().map(|&r| (x.row(r)[f], grad[r])));
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_g = 0.0;
        let mut left_n = 0.0;
        for i in 1..vals.len() {
            left_g += vals[i - 1].1;
            left_n += 1.0;
            let prev = vals[i - 1].0;
            let next = vals[i].0;
            if next <= prev {
                continue;
            }
            let threshold = (prev + next) / 2.0;
            if !(threshold > prev && threshold < next) {
                continue;
            }
            let right_g = total_g - left_g;
            let right_n = n - left_n;
            let gain = left_g * left_g / left_n + right_g * right_g / right_n - base;
            if gain > MIN_GAIN && best.is_none_or(|(_, _, g)| gain > g) {
                best = Some((f, threshold, gain));
            }
        }
    }
    let Some((feature, threshold, _)) = best else {
        return leaf(rows);
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&r| x.row(r)[feature] <= threshold);
    let left = Box::new(grow_regression_tree(
        x,
        &left_rows,
        grad,
        hess,
        max_depth,
        depth + 1,
    ));
    let right = Box::new(grow_regression_tree(
        x,
        &right_rows,
        grad,
        hess,
        max_depth,
        depth + 1,
    ));
    RegNode::Split {
        feature,
        threshold,
        left,
        right,
    }
}
