//! Linear classifiers: logistic regression by full-batch gradient descent
//! and a linear SVM by Pegasos-style subgradient descent, both on
//! standardized columns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Matrix, ModelSpec};

/// Weights plus the standardization parameters captured at fit time.
#[derive(Clone, Debug)]
pub struct LinearModel {
    weights: Vec<f64>,
    bias: f64,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn score(&self, row: &[f64]) -> f64 {
        let mut z = self.bias;
        for j in 0..self.weights.len() {
            z += self.weights[j] * (row[j] - self.mean[j]) / self.scale[j];
        }
        z
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        u8::from(self.score(row) >= 0.0)
    }
}

/// Per-column mean and population standard deviation; zero-variance columns
/// get scale 1 so they standardize to exactly 0.
fn standardization(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.n_rows() as f64;
    let d = x.n_cols();
    let mut mean = vec![0.0; d];
    for r in 0..x.n_rows() {
        for (j, v) in x.row(r).iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut scale = vec![0.0; d];
    for r in 0..x.n_rows() {
        for (j, v) in x.row(r).iter().enumerate() {
            scale[j] += (v - mean[j]).powi(2);
        }
    }
    for s in &mut scale {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    (mean, scale)
}

fn standardized_matrix(x: &Matrix, mean: &[f64], scale: &[f64]) -> Vec<f64> {
    let d = x.n_cols();
    let mut out = Vec::with_capacity(x.n_rows() * d);
    for r in 0..x.n_rows() {
        for (j, v) in x.row(r).iter().enumerate() {
            out.push((v - mean[j]) / scale[j]);
        }
    }
    out
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub(super) fn fit_logistic(spec: &ModelSpec, x: &Matrix, y: &[u8]) -> LinearModel {
    let (mean, scale) = standardization(x);
    let xs = standardized_matrix(x, &mean, &scale);
    let n = x.n_rows();
    let d = x.n_cols();
    let lr = spec.hyper.learning_rate;
    let l2 = spec.hyper.regularization;
    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let mut grad = vec![0.0f64; d];
    for _ in 0..spec.hyper.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for r in 0..n {
            let row = &xs[r * d..(r + 1) * d];
            let mut z = b;
            for j in 0..d {
                z += w[j] * row[j];
            }
            let err = sigmoid(z) - y[r] as f64;
            for j in 0..d {
                grad[j] += err * row[j];
            }
            grad_b += err;
        }
        for j in 0..d {
            w[j] -= lr * (grad[j] / n as f64 + l2 * w[j]);
        }
        b -= lr * grad_b / n as f64;
    }
    LinearModel {
        weights: w,
        bias: b,
        mean,
        scale,
    }
}

pub(super) fn fit_svm(spec: &ModelSpec, x: &Matrix, y: &[u8]) -> LinearModel {
    let (mean, scale) = standardization(x);
    let xs = standardized_matrix(x, &mean, &scale);
    let n = x.n_rows();
    let d = x.n_cols();
    let lambda = spec.hyper.regularization;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Seeded per-sample subgradient descent on the L2-regularized hinge loss
    // with an eta = 1/sqrt(t) schedule and iterate averaging. The bias rides
    // along as an augmented constant coordinate, regularized like the
    // weights, which keeps the updates bounded even on degenerate data.
    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let mut w_avg = vec![0.0f64; d];
    let mut b_avg = 0.0f64;
    let mut t = 0u64;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..spec.hyper.epochs {
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for &r in &order {
            t += 1;
            let eta = 1.0 / (t as f64).sqrt();
            let row = &xs[r * d..(r + 1) * d];
            let label = if y[r] == 1 { 1.0 } else { -1.0 };
            let mut z = b;
            for j in 0..d {
                z += w[j] * row[j];
            }
            let shrink = 1.0 - eta * lambda;
            if label * z < 1.0 {
                for j in 0..d {
                    w[j] = shrink * w[j] + eta * label * row[j];
                }
                b = shrink * b + eta * label;
            } else {
                for wj in &mut w {
                    *wj *= shrink;
                }
                b *= shrink;
            }
            let inv_t = 1.0 / t as f64;
            for j in 0..d {
                w_avg[j] += (w[j] - w_avg[j]) * inv_t;
            }
            b_avg += (b - b_avg) * inv_t;
        }
    }
    LinearModel {
        weights: w_avg,
        bias: b_avg,
        mean,
        scale,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{fit, predict, ModelSpec};
    use super::*;

    #[test]
    fn svm_separates_wide_margin_data() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                if i < 10 {
                    vec![i as f64 * 0.1, 1.0]
                } else {
                    vec![5.0 + i as f64 * 0.1, -1.0]
                }
            })
            .collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let x = Matrix::from_rows(&rows);
        let model = fit(&ModelSpec::linear_svm(0), &x, &y).unwrap();
        assert_eq!(predict(&model, &x).unwrap(), y);
    }

    #[test]
    fn logistic_weights_reflect_the_informative_column() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![f64::from(i % 2), (i as f64 * 0.37) % 1.0])
            .collect();
        let y: Vec<u8> = rows.iter().map(|r| r[0] as u8).collect();
        let x = Matrix::from_rows(&rows);
        let spec = ModelSpec::logistic_regression(0);
        let model = fit_logistic(&spec, &x, &y);
        assert!(model.weights()[0].abs() > model.weights()[1].abs() * 5.0);
    }

    #[test]
    fn standardization_handles_constant_columns() {
        let x = Matrix::from_rows(&[vec![2.0, 1.0], vec![2.0, 3.0]]);
        let (mean, scale) = standardization(&x);
        assert_eq!(mean[0], 2.0);
        assert_eq!(scale[0], 1.0);
        assert_eq!(scale[1], 1.0);
    }
}
