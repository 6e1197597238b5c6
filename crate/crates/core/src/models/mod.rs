//! Downstream classifiers and the N-fold cross-validation evaluator that
//! scores a feature subset with mean train/validation accuracy.
//!
//! Every model is deterministic given `(spec, X, y)`: randomized models draw
//! from a ChaCha stream seeded by the spec, and split ties break toward the
//! lowest feature index, then the lowest threshold.

mod ensemble;
mod linear;
mod tree;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fset::FeatureSet;
use crate::tabular::{Dataset, FoldAssignment};

pub use ensemble::{ForestModel, GbtModel};
pub use linear::LinearModel;
pub use tree::CartModel;

/// The five supported downstream model families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LogisticRegression,
    CartTree,
    RandomForest,
    GradientBoostedTrees,
    LinearSvm,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::CartTree => "cart_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoostedTrees => "gradient_boosted_trees",
            ModelKind::LinearSvm => "linear_svm",
        }
    }
}

/// Kind-specific hyperparameter bundle. `learning_rate` is the gradient-
/// descent step for logistic regression and the shrinkage for boosting;
/// `regularization` is the L2 penalty for logistic regression and the hinge
/// lambda for the SVM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub epochs: usize,
    pub max_depth: Option<usize>,
    pub tree_count: usize,
    pub regularization: f64,
    pub boosting_rounds: usize,
}

/// A model family plus hyperparameters plus the seed feeding its RNG.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hyper: Hyperparameters,
    pub seed: u64,
}

impl ModelSpec {
    /// Defaults per family. These deliberately stay modest: the method is
    /// evaluated without any hyperparameter search.
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        let hyper = match kind {
            ModelKind::LogisticRegression => Hyperparameters {
                learning_rate: 0.5,
                epochs: 200,
                max_depth: None,
                tree_count: 0,
                regularization: 1e-4,
                boosting_rounds: 0,
            },
            ModelKind::CartTree => Hyperparameters {
                learning_rate: 0.0,
                epochs: 0,
                max_depth: None,
                tree_count: 0,
                regularization: 0.0,
                boosting_rounds: 0,
            },
            ModelKind::RandomForest => Hyperparameters {
                learning_rate: 0.0,
                epochs: 0,
                max_depth: None,
                tree_count: 50,
                regularization: 0.0,
                boosting_rounds: 0,
            },
            ModelKind::GradientBoostedTrees => Hyperparameters {
                learning_rate: 0.1,
                epochs: 0,
                max_depth: Some(3),
                tree_count: 0,
                regularization: 0.0,
                boosting_rounds: 50,
            },
            ModelKind::LinearSvm => Hyperparameters {
                learning_rate: 0.0,
                epochs: 200,
                max_depth: None,
                tree_count: 0,
                regularization: 1e-4,
                boosting_rounds: 0,
            },
        };
        ModelSpec { kind, hyper, seed }
    }

    pub fn logistic_regression(seed: u64) -> Self {
        Self::new(ModelKind::LogisticRegression, seed)
    }

    pub fn cart_tree(seed: u64) -> Self {
        Self::new(ModelKind::CartTree, seed)
    }

    pub fn random_forest(seed: u64) -> Self {
        Self::new(ModelKind::RandomForest, seed)
    }

    pub fn gradient_boosted_trees(seed: u64) -> Self {
        Self::new(ModelKind::GradientBoostedTrees, seed)
    }

    pub fn linear_svm(seed: u64) -> Self {
        Self::new(ModelKind::LinearSvm, seed)
    }
}

/// Dense row-major matrix handed to the models.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl Matrix {
    pub fn from_flat(data: Vec<f64>, n_rows: usize, n_cols: usize) -> Self {
        assert_eq!(data.len(), n_rows * n_cols);
        Matrix { data, n_rows, n_cols }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            assert_eq!(row.len(), n_cols);
            data.extend_from_slice(row);
        }
        Matrix {
            data,
            n_rows: rows.len(),
            n_cols,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }
}

/// A trained classifier of any supported family.
#[derive(Clone, Debug)]
pub enum FittedModel {
    Logistic(LinearModel),
    Svm(LinearModel),
    Cart(CartModel),
    Forest(ForestModel),
    Gbt(GbtModel),
}

impl FittedModel {
    pub fn n_features(&self) -> usize {
        match self {
            FittedModel::Logistic(m) | FittedModel::Svm(m) => m.n_features(),
            FittedModel::Cart(m) => m.n_features(),
            FittedModel::Forest(m) => m.n_features(),
            FittedModel::Gbt(m) => m.n_features(),
        }
    }

    /// Total impurity decrease per feature, where the family defines one.
    pub fn feature_importances(&self) -> Option<&[f64]> {
        match self {
            FittedModel::Cart(m) => Some(m.importances()),
            FittedModel::Forest(m) => Some(m.importances()),
            _ => None,
        }
    }
}

fn check_fit_preconditions(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::model("cannot fit on an empty matrix"));
    }
    if x.n_cols() == 0 {
        return Err(Error::model("empty feature restriction"));
    }
    if x.n_rows() != y.len() {
        return Err(Error::model("row/label count mismatch"));
    }
    let ones = y.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::model("training labels contain a single class"));
    }
    Ok(())
}

/// Trains a model of `spec.kind` on `(x, y)`.
pub fn fit(spec: &ModelSpec, x: &Matrix, y: &[u8]) -> Result<FittedModel> {
    check_fit_preconditions(x, y)?;
    Ok(match spec.kind {
        ModelKind::LogisticRegression => FittedModel::Logistic(linear::fit_logistic(spec, x, y)),
        ModelKind::LinearSvm => FittedModel::Svm(linear::fit_svm(spec, x, y)),
        ModelKind::CartTree => FittedModel::Cart(tree::fit_cart(spec, x, y)),
        ModelKind::RandomForest => FittedModel::Forest(ensemble::fit_forest(spec, x, y)),
        ModelKind::GradientBoostedTrees => FittedModel::Gbt(ensemble::fit_gbt(spec, x, y)),
    })
}

/// Predicts one label in {0,1} per row. Errors if the column count differs
/// from fit time.
pub fn predict(model: &FittedModel, x: &Matrix) -> Result<Vec<u8>> {
    if x.n_cols() != model.n_features() {
        return Err(Error::model(format!(
            "predict expects {} columns, got {}",
            model.n_features(),
            x.n_cols()
        )));
    }
    let mut out = Vec::with_capacity(x.n_rows());
    for r in 0..x.n_rows() {
        let row = x.row(r);
        let label = match model {
            FittedModel::Logistic(m) | FittedModel::Svm(m) => m.predict_row(row),
            FittedModel::Cart(m) => m.predict_row(row),
            FittedModel::Forest(m) => m.predict_row(row),
            FittedModel::Gbt(m) => m.predict_row(row),
        };
        out.push(label);
    }
    Ok(out)
}

pub(crate) fn accuracy(predicted: &[u8], truth: &[u8]) -> f64 {
    debug_assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    let correct = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    correct as f64 / truth.len() as f64
}

/// Mean train/validation accuracy over the folds of one subset evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub n_folds: usize,
}

/// The evaluator Φ: trains on every fold complement restricted to `subset`
/// and averages train/validation accuracy. A pure function of
/// `(dataset, subset, spec, folds)`.
pub fn cross_validate(
    dataset: &Dataset,
    subset: &FeatureSet,
    spec: &ModelSpec,
    folds: &FoldAssignment,
) -> Result<Evaluation> {
    if subset.is_empty() {
        return Err(Error::model("cannot evaluate the empty feature set"));
    }
    if !subset.within_universe(dataset.n_features()) {
        return Err(Error::model("subset indexes outside the feature universe"));
    }
    if folds.fold_of_row().len() != dataset.n_rows() {
        return Err(Error::model("fold assignment does not match the dataset"));
    }
    let n_folds = folds.n_folds();
    let mut train_sum = 0.0;
    let mut val_sum = 0.0;
    for fold in 0..n_folds {
        let train_rows = folds.training_rows(fold);
        let val_rows = folds.validation_rows(fold);
        let (train_x, train_y) = dataset.gather(&train_rows, subset);
        let train_m = Matrix::from_flat(train_x, train_rows.len(), subset.len());
        let model = fit(spec, &train_m, &train_y)
            .map_err(|e| Error::model(format!("fold {fold}: {e}")))?;
        train_sum += accuracy(&predict(&model, &train_m)?, &train_y);
        let (val_x, val_y) = dataset.gather(&val_rows, subset);
        let val_m = Matrix::from_flat(val_x, val_rows.len(), subset.len());
        val_sum += accuracy(&predict(&model, &val_m)?, &val_y);
    }
    Ok(Evaluation {
        train_accuracy: train_sum / n_folds as f64,
        val_accuracy: val_sum / n_folds as f64,
        n_folds,
    })
}

/// Trains on all of `train`'s rows restricted to `subset` and returns the
/// accuracy on `test`'s rows. Used for held-out test scoring.
pub fn holdout_accuracy(
    train: &Dataset,
    test: &Dataset,
    subset: &FeatureSet,
    spec: &ModelSpec,
) -> Result<f64> {
    if train.n_features() != test.n_features() {
        return Err(Error::model("train/test feature universes differ"));
    }
    let all_train: Vec<usize> = (0..train.n_rows()).collect();
    let (train_x, train_y) = train.gather(&all_train, subset);
    let train_m = Matrix::from_flat(train_x, all_train.len(), subset.len());
    let model = fit(spec, &train_m, &train_y)?;
    let all_test: Vec<usize> = (0..test.n_rows()).collect();
    let (test_x, test_y) = test.gather(&all_test, subset);
    let test_m = Matrix::from_flat(test_x, all_test.len(), subset.len());
    Ok(accuracy(&predict(&model, &test_m)?, &test_y))
}

/// Caching wrapper around [`cross_validate`] bound to one
/// `(dataset, spec, folds)` context. Repeated queries for the same subset are
/// free and bitwise identical; the cache tolerates concurrent use.
pub struct Evaluator {
    dataset: Arc<Dataset>,
    spec: ModelSpec,
    folds: FoldAssignment,
    cache: Mutex<HashMap<FeatureSet, Evaluation>>,
}

impl Evaluator {
    pub fn new(dataset: Arc<Dataset>, spec: ModelSpec, folds: FoldAssignment) -> Result<Self> {
        if folds.fold_of_row().len() != dataset.n_rows() {
            return Err(Error::model("fold assignment does not match the dataset"));
        }
        Ok(Evaluator {
            dataset,
            spec,
            folds,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn folds(&self) -> &FoldAssignment {
        &self.folds
    }

    pub fn evaluate(&self, subset: &FeatureSet) -> Result<Evaluation> {
        if let Some(hit) = self.cache.lock().unwrap().get(subset) {
            return Ok(*hit);
        }
        let eval = cross_validate(&self.dataset, subset, &self.spec, &self.folds)?;
        // Idempotent double-insert: Φ is pure, so a racing computation of the
        // same key stores the same value.
        self.cache.lock().unwrap().insert(subset.clone(), eval);
        Ok(eval)
    }

    pub fn cached_evaluations(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}
