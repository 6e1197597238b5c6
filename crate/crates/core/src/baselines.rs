//! The four classical feature-selection initializers: decision-tree,
//! random-forest and logistic importance plus the Fisher score, with subset
//! extraction policies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fset::FeatureSet;
use crate::models::{self, FittedModel, Matrix, ModelKind, ModelSpec};
use crate::tabular::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    DecisionTree,
    RandomForest,
    Logistic,
    FisherScore,
}

impl ImportanceMethod {
    pub const ALL: [ImportanceMethod; 4] = [
        ImportanceMethod::DecisionTree,
        ImportanceMethod::RandomForest,
        ImportanceMethod::Logistic,
        ImportanceMethod::FisherScore,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ImportanceMethod::DecisionTree => "decision_tree",
            ImportanceMethod::RandomForest => "random_forest",
            ImportanceMethod::Logistic => "logistic",
            ImportanceMethod::FisherScore => "fisher_score",
        }
    }
}

/// One non-negative score per feature, higher is more important.
#[derive(Clone, Debug)]
pub struct ImportanceVector {
    pub method: ImportanceMethod,
    pub scores: Vec<f64>,
}

/// How to turn scores into a feature subset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionPolicy {
    /// Keep features scoring strictly above the mean; falls back to the
    /// single best feature when nothing clears the mean.
    AboveMean,
    /// Keep the `k` largest scores, ties toward the lowest index.
    TopK(usize),
}

/// Fisher score per feature: between-class mean spread over pooled
/// within-class variance (population variances), 0 when the denominator is 0.
fn fisher_scores(dataset: &Dataset) -> Vec<f64> {
    let d = dataset.n_features();
    let n = dataset.n_rows();
    let labels = dataset.labels();
    let mut scores = Vec::with_capacity(d);
    for col in 0..d {
        let mut sums = [0.0f64; 2];
        let mut counts = [0usize; 2];
        for r in 0..n {
            sums[labels[r] as usize] += dataset.value(r, col);
            counts[labels[r] as usize] += 1;
        }
        let overall_mean = (sums[0] + sums[1]) / n as f64;
        let mut numerator = 0.0;
        let mut denominator = 0.0;
        for c in 0..2 {
            if counts[c] == 0 {
                continue;
            }
            let mean_c = sums[c] / counts[c] as f64;
            let var_c = (0..n)
                .filter(|&r| labels[r] as usize == c)
                .map(|r| (dataset.value(r, col) - mean_c).powi(2))
                .sum::<f64>()
                / counts[c] as f64;
            numerator += counts[c] as f64 * (mean_c - overall_mean).powi(2);
            denominator += counts[c] as f64 * var_c;
        }
        scores.push(if denominator == 0.0 {
            0.0
        } else {
            numerator / denominator
        });
    }
    scores
}

/// Scores every feature with the requested method. Tree methods report total
/// Gini decrease (the forest averages over trees); logistic reports absolute
/// standardized weights. `spec` supplies hyperparameters; the model kind is
/// forced to match the method.
pub fn feature_importances(
    dataset: &Dataset,
    method: ImportanceMethod,
    spec: &ModelSpec,
    seed: u64,
) -> Result<ImportanceVector> {
    let counts = dataset.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::data("importance scoring needs both classes present"));
    }
    let scores = match method {
        ImportanceMethod::FisherScore => fisher_scores(dataset),
        _ => {
            let kind = match method {
                ImportanceMethod::DecisionTree => ModelKind::CartTree,
                ImportanceMethod::RandomForest => ModelKind::RandomForest,
                ImportanceMethod::Logistic => ModelKind::LogisticRegression,
                ImportanceMethod::FisherScore => unreachable!(),
            };
            // honor the caller's hyperparameters when they were written for
            // this model family, otherwise fall back to the family defaults
            let fit_spec = if spec.kind == kind {
                ModelSpec { seed, ..*spec }
            } else {
                ModelSpec::new(kind, seed)
            };
            let rows: Vec<usize> = (0..dataset.n_rows()).collect();
            let subset = FeatureSet::from_indices(0..dataset.n_features());
            let (x, y) = dataset.gather(&rows, &subset);
            let matrix = Matrix::from_flat(x, rows.len(), dataset.n_features());
            let model = models::fit(&fit_spec, &matrix, &y)?;
            match &model {
                FittedModel::Logistic(m) => m.weights().iter().map(|w| w.abs()).collect(),
                _ => model
                    .feature_importances()
                    .expect("tree models expose importances")
                    .to_vec(),
            }
        }
    };
    debug_assert!(scores.iter().all(|s| s.is_finite() && *s >= 0.0));
    Ok(ImportanceVector { method, scores })
}

/// Extracts a non-empty subset from an importance vector.
pub fn select_by_importance(
    importances: &ImportanceVector,
    policy: SelectionPolicy,
) -> Result<FeatureSet> {
    let scores = &importances.scores;
    let n = scores.len();
    if n == 0 {
        return Err(Error::data("no features to select from"));
    }
    match policy {
        SelectionPolicy::AboveMean => {
            let mean = scores.iter().sum::<f64>() / n as f64;
            let kept: Vec<usize> = (0..n).filter(|&i| scores[i] > mean).collect();
            if kept.is_empty() {
                select_by_importance(importances, SelectionPolicy::TopK(1))
            } else {
                Ok(FeatureSet::from_indices(kept))
            }
        }
        SelectionPolicy::TopK(k) => {
            if k == 0 || k > n {
                return Err(Error::data(format!("top_k requires 1 <= k <= {n}, got {k}")));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            Ok(FeatureSet::from_indices(order[..k].iter().copied()))
        }
    }
}
