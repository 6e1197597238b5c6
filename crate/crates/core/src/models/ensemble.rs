//! Tree ensembles: a seeded random forest and gradient-boosted trees with
//! logistic loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::{grow_classifier_tree, grow_regression_tree, FeatureSampling, Node, RegNode};
use super::{Matrix, ModelSpec};
use crate::seeding;

/// Bagged classification trees with per-split feature subsampling of ⌈√d⌉.
#[derive(Clone, Debug)]
pub struct ForestModel {
    trees: Vec<Node>,
    n_features: usize,
    importances: Vec<f64>,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Mean over trees of the per-tree Gini decrease.
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let ones: usize = self
            .trees
            .iter()
            .map(|t| t.predict_row(row) as usize)
            .sum();
        u8::from(2 * ones > self.trees.len())
    }
}

pub(super) fn fit_forest(spec: &ModelSpec, x: &Matrix, y: &[u8]) -> ForestModel {
    let n = x.n_rows();
    let d = x.n_cols();
    let m = (d as f64).sqrt().ceil() as usize;
    let tree_count = spec.hyper.tree_count.max(1);
    let mut trees = Vec::with_capacity(tree_count);
    let mut importances = vec![0.0; d];
    for t in 0..tree_count {
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(&[spec.seed, t as u64]));
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut sampling = FeatureSampling::Subsample { m, rng: &mut rng };
        let (root, tree_imp) =
            grow_classifier_tree(x, y, &rows, spec.hyper.max_depth, &mut sampling);
        for (acc, v) in importances.iter_mut().zip(&tree_imp) {
            *acc += v;
        }
        trees.push(root);
    }
    for v in &mut importances {
        *v /= tree_count as f64;
    }
    ForestModel {
        trees,
        n_features: d,
        importances,
    }
}

/// Logistic-loss boosting of depth-limited regression trees.
#[derive(Clone, Debug)]
pub struct GbtModel {
    base_score: f64,
    shrinkage: f64,
    trees: Vec<RegNode>,
    n_features: usize,
}

impl GbtModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    fn score(&self, row: &[f64]) -> f64 {
        let mut s = self.base_score;
        for tree in &self.trees {
            s += self.shrinkage * tree.predict_row(row);
        }
        s
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        u8::from(self.score(row) >= 0.0)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub(super) fn fit_gbt(spec: &ModelSpec, x: &Matrix, y: &[u8]) -> GbtModel {
    let n = x.n_rows();
    let rows: Vec<usize> = (0..n).collect();
    let p0 = (y.iter().map(|&l| l as f64).sum::<f64>() / n as f64).clamp(1e-12, 1.0 - 1e-12);
    let base_score = (p0 / (1.0 - p0)).ln();
    let shrinkage = spec.hyper.learning_rate;
    let mut scores = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(spec.hyper.boosting_rounds);
    for _ in 0..spec.hyper.boosting_rounds {
        for r in 0..n {
            let p = sigmoid(scores[r]);
            grad[r] = y[r] as f64 - p;
            hess[r] = p * (1.0 - p);
        }
        let tree = grow_regression_tree(x, &rows, &grad, &hess, spec.hyper.max_depth, 0);
        for r in 0..n {
            scores[r] += shrinkage * tree.predict_row(x.row(r));
        }
        trees.push(tree);
    }
    GbtModel {
        base_score,
        shrinkage,
        trees,
        n_features: x.n_cols(),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{accuracy, fit, predict, ModelSpec};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy_threshold_data(n: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] > 0.5)).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn forest_is_deterministic_given_seed() {
        let (x, y) = noisy_threshold_data(60, 1);
        let a = fit(&ModelSpec::random_forest(33), &x, &y).unwrap();
        let b = fit(&ModelSpec::random_forest(33), &x, &y).unwrap();
        assert_eq!(predict(&a, &x).unwrap(), predict(&b, &x).unwrap());
    }

    #[test]
    fn forest_learns_a_threshold_rule() {
        let (x, y) = noisy_threshold_data(120, 2);
        let model = fit(&ModelSpec::random_forest(0), &x, &y).unwrap();
        let acc = accuracy(&predict(&model, &x).unwrap(), &y);
        assert!(acc > 0.95, "{acc}");
    }

    #[test]
    fn gbt_learns_a_threshold_rule() {
        let (x, y) = noisy_threshold_data(120, 3);
        let model = fit(&ModelSpec::gradient_boosted_trees(0), &x, &y).unwrap();
        let acc = accuracy(&predict(&model, &x).unwrap(), &y);
        assert!(acc > 0.95, "{acc}");
    }
}
