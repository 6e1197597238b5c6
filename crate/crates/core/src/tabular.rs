//! Dataset ingestion, encoding, median imputation, SMOTE class balancing and
//! seeded stratified fold assignment.
//!
//! All operations are pure given their inputs and seed; a [`Dataset`] is
//! immutable after construction and safe to share across threads.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fset::FeatureSet;

/// Cell values use NaN as the missing marker until imputation runs.
pub const MISSING: f64 = f64::NAN;

/// How a column was ingested. Integer-coded columns carry the number of
/// distinct codes so interpolated or imputed values can be snapped back to a
/// valid code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    IntegerCoded { n_codes: usize },
}

/// A tabular binary-classification dataset: feature matrix, labels and the
/// task description handed to the LM operator.
#[derive(Clone, Debug)]
pub struct Dataset {
    feature_names: Vec<String>,
    columns: Vec<ColumnKind>,
    /// Row-major, `n_rows * n_features`.
    x: Vec<f64>,
    y: Vec<u8>,
    task_description: String,
}

impl Dataset {
    /// Validates the struct invariants and builds a dataset. `rows` is one
    /// entry per sample.
    pub fn from_rows(
        feature_names: Vec<String>,
        columns: Vec<ColumnKind>,
        rows: Vec<Vec<f64>>,
        y: Vec<u8>,
        task_description: impl Into<String>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if columns.len() != d {
            return Err(Error::data("one column kind required per feature"));
        }
        {
            let mut seen = std::collections::HashSet::new();
            for name in &feature_names {
                if !seen.insert(name) {
                    return Err(Error::data(format!("duplicate feature name {name:?}")));
                }
            }
        }
        if rows.len() != y.len() {
            return Err(Error::data("label count does not match row count"));
        }
        let mut x = Vec::with_capacity(rows.len() * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::data(format!(
                    "ragged row: expected {d} values, found {}",
                    row.len()
                )));
            }
            x.extend_from_slice(row);
        }
        if let Some(bad) = y.iter().find(|&&l| l > 1) {
            return Err(Error::data(format!("label {bad} is not binary")));
        }
        Ok(Dataset {
            feature_names,
            columns,
            x,
            y,
            task_description: task_description.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn columns(&self) -> &[ColumnKind] {
        &self.columns
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.x[row * self.n_features() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let d = self.n_features();
        &self.x[row * d..(row + 1) * d]
    }

    pub fn task_description(&self) -> &str {
        &self.task_description
    }

    pub fn with_task_description(mut self, task: impl Into<String>) -> Self {
        self.task_description = task.into();
        self
    }

    /// Rows per class, indexed by label.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for &l in &self.y {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn has_missing(&self) -> bool {
        self.x.iter().any(|v| v.is_nan())
    }

    /// A new dataset containing `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let d = self.n_features();
        let mut x = Vec::with_capacity(rows.len() * d);
        let mut y = Vec::with_capacity(rows.len());
        for &r in rows {
            x.extend_from_slice(self.row(r));
            y.push(self.y[r]);
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            columns: self.columns.clone(),
            x,
            y,
            task_description: self.task_description.clone(),
        }
    }

    /// Flat row-major matrix restricted to `rows` and `subset`, plus labels.
    pub fn gather(&self, rows: &[usize], subset: &FeatureSet) -> (Vec<f64>, Vec<u8>) {
        let idx = subset.indices();
        let mut x = Vec::with_capacity(rows.len() * idx.len());
        let mut y = Vec::with_capacity(rows.len());
        for &r in rows {
            let row = self.row(r);
            x.extend(idx.iter().map(|&j| row[j]));
            y.push(self.y[r]);
        }
        (x, y)
    }
}

/// Per-row fold indices produced by [`stratified_folds`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of_row: Vec<usize>,
    n_folds: usize,
    seed: u64,
}

impl FoldAssignment {
    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_of_row(&self) -> &[usize] {
        &self.fold_of_row
    }

    /// Rows held out for validation in fold `fold`.
    pub fn validation_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_row.len())
            .filter(|&r| self.fold_of_row[r] == fold)
            .collect()
    }

    /// Rows used for training in fold `fold`.
    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_row.len())
            .filter(|&r| self.fold_of_row[r] != fold)
            .collect()
    }
}

fn is_missing_cell(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "nan")
}

/// Loads a CSV file (header row required) and encodes it as a [`Dataset`].
///
/// The target column must hold exactly two distinct values; the
/// lexicographically smaller one maps to label 0. Feature columns where every
/// non-missing cell parses as a number stay numeric; any other column is
/// integer-coded by first appearance. Empty cells and the literals `NA` and
/// `nan` are missing markers.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::data(format!("cannot open {}: {e}", path.display())),
            _ => Error::Csv(e),
        })?;

    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::data(format!("target column {target_column:?} not found")))?;

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    {
        let mut seen = std::collections::HashSet::new();
        for name in &feature_names {
            if !seen.insert(name) {
                return Err(Error::data(format!("duplicate feature name {name:?}")));
            }
        }
    }

    let mut raw_rows: Vec<Vec<String>> = Vec::new();
    let mut raw_targets: Vec<String> = Vec::new();
    for record in reader.records() {
        let record = record?; // ragged rows surface here
        let mut row = Vec::with_capacity(feature_names.len());
        for (i, cell) in record.iter().enumerate() {
            if i == target_idx {
                raw_targets.push(cell.trim().to_string());
            } else {
                row.push(cell.trim().to_string());
            }
        }
        raw_rows.push(row);
    }
    if raw_rows.is_empty() {
        return Err(Error::data("no data rows"));
    }

    // Target: exactly two distinct values, lexicographically smaller -> 0.
    let mut distinct: Vec<&String> = Vec::new();
    for t in &raw_targets {
        if !distinct.iter().any(|d| *d == t) {
            distinct.push(t);
        }
    }
    if distinct.len() != 2 {
        return Err(Error::data(format!(
            "target column must hold exactly 2 distinct values, found {}",
            distinct.len()
        )));
    }
    distinct.sort();
    let zero_value = distinct[0].clone();
    let y: Vec<u8> = raw_targets
        .iter()
        .map(|t| u8::from(*t != zero_value))
        .collect();

    // Column typing: numeric iff every non-missing cell parses as f64.
    let d = feature_names.len();
    let mut columns = Vec::with_capacity(d);
    let mut x = vec![0.0f64; raw_rows.len() * d];
    for col in 0..d {
        let numeric = raw_rows
            .iter()
            .all(|row| is_missing_cell(&row[col]) || row[col].parse::<f64>().is_ok());
        if numeric {
            for (r, row) in raw_rows.iter().enumerate() {
                x[r * d + col] = if is_missing_cell(&row[col]) {
                    MISSING
                } else {
                    row[col].parse::<f64>().unwrap()
                };
            }
            columns.push(ColumnKind::Numeric);
        } else {
            let mut codes: HashMap<&str, usize> = HashMap::new();
            let mut next = 0usize;
            for (r, row) in raw_rows.iter().enumerate() {
                x[r * d + col] = if is_missing_cell(&row[col]) {
                    MISSING
                } else {
                    let code = *codes.entry(row[col].as_str()).or_insert_with(|| {
                        let c = next;
                        next += 1;
                        c
                    });
                    code as f64
                };
            }
            columns.push(ColumnKind::IntegerCoded { n_codes: next });
        }
    }

    Ok(Dataset {
        feature_names,
        columns,
        x,
        y,
        task_description: String::new(),
    })
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Replaces every missing cell with the median of the non-missing values in
/// its column. Integer-coded medians are rounded half-up and snapped into the
/// valid code range; fully missing columns are filled with 0. Idempotent.
pub fn impute_median(dataset: &Dataset) -> Dataset {
    let d = dataset.n_features();
    let n = dataset.n_rows();
    let mut out = dataset.clone();
    for col in 0..d {
        let mut values: Vec<f64> = (0..n)
            .map(|r| dataset.value(r, col))
            .filter(|v| !v.is_nan())
            .collect();
        let fill = if values.is_empty() {
            0.0
        } else {
            values.sort_by(f64::total_cmp);
            let m = median_of(&values);
            match dataset.columns[col] {
                ColumnKind::Numeric => m,
                ColumnKind::IntegerCoded { n_codes } => {
                    // round half-up, then clamp to the valid code range
                    let code = (m + 0.5).floor();
                    let max = n_codes.saturating_sub(1) as f64;
                    code.clamp(0.0, max)
                }
            }
        };
        for r in 0..n {
            if out.x[r * d + col].is_nan() {
                out.x[r * d + col] = fill;
            }
        }
    }
    out
}

/// Provenance of one synthetic SMOTE row: the minority row it interpolates
/// from and the neighbor it interpolates toward.
#[derive(Clone, Copy, Debug)]
pub struct SyntheticParent {
    pub base_row: usize,
    pub neighbor_row: usize,
}

/// [`smote_balance`] plus per-synthetic-row provenance, for auditing the
/// interpolation geometry.
pub fn smote_balance_traced(
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<(Dataset, Vec<SyntheticParent>)> {
    let counts = dataset.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::data("both classes must be non-empty"));
    }
    if counts[0] == counts[1] {
        return Ok((dataset.clone(), Vec::new()));
    }
    let minority = u8::from(counts[1] < counts[0]);
    let n_min = counts[minority as usize];
    let n_maj = counts[1 - minority as usize];
    if n_min < 2 {
        return Err(Error::data("minority class must have at least 2 rows"));
    }

    let d = dataset.n_features();
    let n = dataset.n_rows();

    // Standardization parameters over the full dataset, for the distance only.
    let mut mean = vec![0.0f64; d];
    let mut scale = vec![1.0f64; d];
    for col in 0..d {
        let m = (0..n).map(|r| dataset.value(r, col)).sum::<f64>() / n as f64;
        let var = (0..n)
            .map(|r| (dataset.value(r, col) - m).powi(2))
            .sum::<f64>()
            / n as f64;
        mean[col] = m;
        scale[col] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let standardized = |r: usize, c: usize| (dataset.value(r, c) - mean[c]) / scale[c];

    let minority_rows: Vec<usize> = (0..n).filter(|&r| dataset.y[r] == minority).collect();
    let k_eff = k.min(n_min - 1);

    // k nearest minority neighbors per minority row; ties by row index.
    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(n_min);
    for &a in &minority_rows {
        let mut dists: Vec<(f64, usize)> = minority_rows
            .iter()
            .filter(|&&b| b != a)
            .map(|&b| {
                let d2 = (0..d)
                    .map(|c| (standardized(a, c) - standardized(b, c)).powi(2))
                    .sum::<f64>();
                (d2, b)
            })
            .collect();
        dists.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        neighbors.push(dists[..k_eff].iter().map(|&(_, b)| b).collect());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = dataset.clone();
    let mut parents = Vec::with_capacity(n_maj - n_min);
    for i in 0..n_maj - n_min {
        let slot = i % n_min;
        let base = minority_rows[slot];
        let neighbor = neighbors[slot][rng.random_range(0..k_eff)];
        let u: f64 = rng.random();
        let mut row = Vec::with_capacity(d);
        for c in 0..d {
            let a = dataset.value(base, c);
            let b = dataset.value(neighbor, c);
            let mut v = a + u * (b - a);
            if let ColumnKind::IntegerCoded { n_codes } = dataset.columns[c] {
                let max = n_codes.saturating_sub(1) as f64;
                v = v.round().clamp(0.0, max.max(a.max(b)));
            }
            row.push(v);
        }
        out.x.extend_from_slice(&row);
        out.y.push(minority);
        parents.push(SyntheticParent {
            base_row: base,
            neighbor_row: neighbor,
        });
    }
    Ok((out, parents))
}

/// Oversamples the minority class by SMOTE until class counts are equal.
/// Synthetic rows interpolate between a minority row and one of its `k`
/// nearest minority neighbors (Euclidean distance on standardized columns);
/// integer-coded coordinates are rounded to the nearest valid code. Original
/// rows are preserved unchanged as a prefix. Deterministic given `seed`.
pub fn smote_balance(dataset: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    smote_balance_traced(dataset, k, seed).map(|(d, _)| d)
}

/// Seeded stratified N-fold assignment: per-class shuffle followed by
/// round-robin placement, so per-fold class counts differ from proportional
/// by at most one. A pure function of `(dataset.labels, n_folds, seed)`.
pub fn stratified_folds(dataset: &Dataset, n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::data("need at least 2 folds"));
    }
    let counts = dataset.class_counts();
    for (class, &count) in counts.iter().enumerate() {
        if count < n_folds {
            return Err(Error::data(format!(
                "class {class} has {count} rows, fewer than {n_folds} folds"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of_row = vec![0usize; dataset.n_rows()];
    for class in 0..2u8 {
        let mut rows: Vec<usize> = (0..dataset.n_rows())
            .filter(|&r| dataset.y[r] == class)
            .collect();
        shuffle(&mut rows, &mut rng);
        for (pos, &row) in rows.iter().enumerate() {
            fold_of_row[row] = pos % n_folds;
        }
    }
    Ok(FoldAssignment {
        fold_of_row,
        n_folds,
        seed,
    })
}

/// Seeded stratified train/test split. Returns `(train_rows, test_rows)`;
/// the test side receives `round(test_fraction * class_count)` rows of each
/// class. Row order within each side follows the shuffled draw.
pub fn stratified_split(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::data("test fraction must lie in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..2u8 {
        let mut rows: Vec<usize> = (0..dataset.n_rows())
            .filter(|&r| dataset.labels()[r] == class)
            .collect();
        if rows.is_empty() {
            return Err(Error::data(format!("class {class} is empty")));
        }
        shuffle(&mut rows, &mut rng);
        let n_test = (test_fraction * rows.len() as f64 + 0.5).floor() as usize;
        let n_test = n_test.min(rows.len().saturating_sub(1));
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    Ok((train, test))
}

/// Fisher-Yates with our own RNG calls, so the shuffle sequence is pinned by
/// this crate rather than by `rand`'s evolving `SliceRandom` internals.
fn shuffle(rows: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..rows.len()).rev() {
        let j = rng.random_range(0..=i);
        rows.swap(i, j);
    }
}
