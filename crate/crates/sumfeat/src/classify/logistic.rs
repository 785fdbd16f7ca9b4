//! L2-regularized logistic regression trained with a deterministic full-batch
//! L-BFGS solver. Inputs are standardized internally with parameters fitted
//! on the training matrix.

use serde::{Deserialize, Serialize};

use crate::dataset::Standardizer;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    /// Inverse regularization strength C; the penalty is 0.5/C * ||w||^2
    /// over the weights (bias excluded).
    pub inverse_reg: f64,
    /// Iteration budget for the solver.
    pub max_iters: usize,
    /// Stop when the infinity norm of the gradient drops below this.
    pub grad_tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            inverse_reg: 1.0,
            max_iters: 500,
            grad_tol: 1e-6,
        }
    }
}

/// Fitted logistic model. For binary problems a single weight block scores
/// class 1; for K > 2 classes there is one block per class under a softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    weights: Vec<f64>,
    biases: Vec<f64>,
    n_features: usize,
    n_classes: usize,
    scaler: Standardizer,
    config: LogisticConfig,
    iterations: usize,
}

impl LogisticModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Weight blocks, one per margin (1 for binary, K for multi-class),
    /// each of length `n_features`.
    pub fn weight_blocks(&self) -> Vec<&[f64]> {
        self.weights.chunks(self.n_features).collect()
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Class-probability rows for an already complete feature matrix.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.cols() != self.n_features {
            return Err(Error::Config(format!(
                "model expects {} features, input has {}",
                self.n_features,
                x.cols()
            )));
        }
        if x.has_absent() {
            return Err(Error::Data(
                "input contains absent values; impute them or use a representation without missing entries".into(),
            ));
        }
        let xs = self.scaler.transform(x)?;
        let mut out = FeatureMatrix::zeros(x.rows(), self.n_classes);
        for r in 0..xs.rows() {
            let row = xs.row(r);
            if self.n_classes == 2 {
                let z = dot(&self.weights, row) + self.biases[0];
                let p = sigmoid(z);
                out.set(r, 0, 1.0 - p);
                out.set(r, 1, p);
            } else {
                let mut margins = vec![0.0; self.n_classes];
                for (k, margin) in margins.iter_mut().enumerate() {
                    let block = &self.weights[k * self.n_features..(k + 1) * self.n_features];
                    *margin = dot(block, row) + self.biases[k];
                }
                let probs = softmax(&margins);
                for (k, p) in probs.iter().enumerate() {
                    out.set(r, k, *p);
                }
            }
        }
        Ok(out)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax(margins: &[f64]) -> Vec<f64> {
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = margins.iter().map(|&m| (m - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Regularized cross-entropy objective and its gradient at `theta`.
///
/// Parameter layout: one block of `n_features` weights plus a bias per
/// margin; binary problems have one margin, multi-class problems K. The data
/// matrix is used as given (no internal standardization), which makes this
/// directly checkable against finite differences.
pub fn objective(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    l2: f64,
    theta: &[f64],
) -> (f64, Vec<f64>) {
    let f = x.cols();
    let block = f + 1;
    let margins_per_sample = if n_classes == 2 { 1 } else { n_classes };
    assert_eq!(theta.len(), margins_per_sample * block, "theta layout");
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];

    if n_classes == 2 {
        let (w, b) = (&theta[..f], theta[f]);
        for r in 0..x.rows() {
            let row = x.row(r);
            let z = dot(w, row) + b;
            let yi = y[r] as f64;
            // log(1 + e^z) - y z, stable for large |z|
            loss += z.max(0.0) - yi * z + (-z.abs()).exp().ln_1p();
            let delta = sigmoid(z) - yi;
            for (g, &v) in grad[..f].iter_mut().zip(row) {
                *g += delta * v;
            }
            grad[f] += delta;
        }
    } else {
        let mut margins = vec![0.0; n_classes];
        for r in 0..x.rows() {
            let row = x.row(r);
            for (k, margin) in margins.iter_mut().enumerate() {
                let w = &theta[k * block..k * block + f];
                *margin = dot(w, row) + theta[k * block + f];
            }
            let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + margins.iter().map(|&m| (m - max).exp()).sum::<f64>().ln();
            loss += lse - margins[y[r]];
            for k in 0..n_classes {
                let p = (margins[k] - lse).exp();
                let delta = p - if y[r] == k { 1.0 } else { 0.0 };
                let gblock = &mut grad[k * block..(k + 1) * block];
                for (g, &v) in gblock[..f].iter_mut().zip(row) {
                    *g += delta * v;
                }
                gblock[f] += delta;
            }
        }
    }

    // ridge penalty on weights, biases excluded
    for k in 0..margins_per_sample {
        for j in 0..f {
            let w = theta[k * block + j];
            loss += 0.5 * l2 * w * w;
            grad[k * block + j] += l2 * w;
        }
    }
    (loss, grad)
}

/// Minimize `objective` with L-BFGS (history 10) and Armijo backtracking.
/// Everything is full-batch and order-fixed, so the result is a pure function
/// of the inputs.
fn lbfgs_minimize(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    l2: f64,
    theta0: Vec<f64>,
    max_iters: usize,
    grad_tol: f64,
) -> (Vec<f64>, usize) {
    const HISTORY: usize = 10;
    const ARMIJO_C1: f64 = 1e-4;
    let mut theta = theta0;
    let (mut loss, mut grad) = objective(x, y, n_classes, l2, &theta);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut iterations = 0;

    for iter in 0..max_iters {
        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm <= grad_tol {
            break;
        }
        iterations = iter + 1;

        // two-loop recursion
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = vec![0.0; s_hist.len()];
        for i in (0..s_hist.len()).rev() {
            let alpha = rho_hist[i] * dot(&s_hist[i], &dir);
            alphas[i] = alpha;
            for (d, yv) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= alpha * yv;
            }
        }
        if let (Some(s), Some(yv)) = (s_hist.last(), y_hist.last()) {
            let sy = dot(s, yv);
            let yy = dot(yv, yv);
            if sy > 0.0 && yy > 0.0 {
                let gamma = sy / yy;
                for d in dir.iter_mut() {
                    *d *= gamma;
                }
            }
        }
        for i in 0..s_hist.len() {
            let beta = rho_hist[i] * dot(&y_hist[i], &dir);
            for (d, sv) in dir.iter_mut().zip(&s_hist[i]) {
                *d += (alphas[i] - beta) * sv;
            }
        }

        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            // not a descent direction; fall back to steepest descent
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&dir)
                .map(|(t, d)| t + step * d)
                .collect();
            let (new_loss, new_grad) = objective(x, y, n_classes, l2, &candidate);
            if new_loss <= loss + ARMIJO_C1 * step * slope {
                accepted = Some((candidate, new_loss, new_grad));
                break;
            }
            step *= 0.5;
        }
        let Some((new_theta, new_loss, new_grad)) = accepted else {
            break; // line search exhausted; gradient is numerically flat
        };

        let s: Vec<f64> = new_theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 {
            if s_hist.len() == HISTORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(yv);
        }
        theta = new_theta;
        loss = new_loss;
        grad = new_grad;
    }
    (theta, iterations)
}

/// Fit a logistic model. The input must be complete (no absent entries) and
/// contain at least two classes.
pub fn fit_logistic(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    config: &LogisticConfig,
) -> Result<LogisticModel> {
    if x.rows() != y.len() {
        return Err(Error::Config(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if x.rows() < 2 {
        return Err(Error::Data("need at least two training samples".into()));
    }
    if x.has_absent() {
        return Err(Error::Data(
            "training matrix contains absent values; impute them or use the summary/mask representation".into(),
        ));
    }
    if n_classes < 2 {
        return Err(Error::Config("need at least two classes".into()));
    }
    let mut seen = vec![false; n_classes];
    for &label in y {
        if label >= n_classes {
            return Err(Error::Data(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        seen[label] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::Data(
            "training labels contain a single class; nothing to separate".into(),
        ));
    }
    if !(config.inverse_reg > 0.0) {
        return Err(Error::Config("inverse regularization must be > 0".into()));
    }

    let scaler = Standardizer::fit(x);
    let xs = scaler.transform(x)?;
    let l2 = 1.0 / config.inverse_reg;
    let f = x.cols();
    let margins = if n_classes == 2 { 1 } else { n_classes };
    let theta0 = vec![0.0; margins * (f + 1)];
    let (theta, iterations) =
        lbfgs_minimize(&xs, y, n_classes, l2, theta0, config.max_iters, config.grad_tol);
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric("logistic solver diverged".into()));
    }

    let block = f + 1;
    let mut weights = Vec::with_capacity(margins * f);
    let mut biases = Vec::with_capacity(margins);
    for k in 0..margins {
        weights.extend_from_slice(&theta[k * block..k * block + f]);
        biases.push(theta[k * block + f]);
    }
    Ok(LogisticModel {
        weights,
        biases,
        n_features: f,
        n_classes,
        scaler,
        config: config.clone(),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn separable_two_points() {
        let x = matrix(&[&[-1.0], &[1.0]]);
        let y = vec![0, 1];
        let model = fit_logistic(&x, &y, 2, &LogisticConfig::default()).unwrap();
        let p = model.predict_proba(&x).unwrap();
        assert!(p.get(0, 1) < 0.5);
        assert!(p.get(1, 1) > 0.5);
    }

    #[test]
    fn rows_sum_to_one() {
        let x = matrix(&[&[0.0, 1.0], &[1.0, 0.0], &[2.0, 2.0], &[3.0, 1.0]]);
        let y = vec![0, 1, 2, 1];
        let model = fit_logistic(&x, &y, 3, &LogisticConfig::default()).unwrap();
        let p = model.predict_proba(&x).unwrap();
        for r in 0..p.rows() {
            let sum: f64 = p.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_in_positive_weight_feature() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen_range(-2.0..2.0)]).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] > 0.0)).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let model = fit_logistic(&x, &y, 2, &LogisticConfig::default()).unwrap();
        assert!(model.weight_blocks()[0][0] > 0.0);
        let probe = matrix(&[&[-1.0], &[0.0], &[1.0]]);
        let p = model.predict_proba(&probe).unwrap();
        assert!(p.get(0, 1) < p.get(1, 1));
        assert!(p.get(1, 1) < p.get(2, 1));
    }

    #[test]
    fn absent_entries_are_rejected_with_guidance() {
        let x = matrix(&[&[1.0], &[f64::NAN]]);
        let err = fit_logistic(&x, &[0, 1], 2, &LogisticConfig::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("impute"), "{msg}");
    }

    #[test]
    fn single_class_is_an_error() {
        let x = matrix(&[&[1.0], &[2.0]]);
        assert!(fit_logistic(&x, &[1, 1], 2, &LogisticConfig::default()).is_err());
    }

    #[test]
    fn deterministic_across_runs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let a = fit_logistic(&x, &y, 2, &LogisticConfig::default()).unwrap();
        let b = fit_logistic(&x, &y, 2, &LogisticConfig::default()).unwrap();
        let bits = |m: &LogisticModel| -> Vec<u64> {
            m.weights.iter().chain(&m.biases).map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for &n_classes in &[2usize, 3] {
            let rows: Vec<Vec<f64>> = (0..20)
                .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let y: Vec<usize> = (0..20).map(|_| rng.gen_range(0..n_classes)).collect();
            let x = FeatureMatrix::from_rows(&rows).unwrap();
            let margins = if n_classes == 2 { 1 } else { n_classes };
            let dim = margins * 5;
            for _ in 0..5 {
                let theta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let (_, grad) = objective(&x, &y, n_classes, 0.7, &theta);
                let h = 1e-5;
                for j in 0..dim {
                    let mut plus = theta.clone();
                    plus[j] += h;
                    let mut minus = theta.clone();
                    minus[j] -= h;
                    let (lp, _) = objective(&x, &y, n_classes, 0.7, &plus);
                    let (lm, _) = objective(&x, &y, n_classes, 0.7, &minus);
                    let fd = (lp - lm) / (2.0 * h);
                    let denom = grad[j].abs().max(1.0);
                    assert!(
                        ((grad[j] - fd) / denom).abs() < 1e-5,
                        "component {j}: {} vs {}",
                        grad[j],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn shuffled_labels_score_near_chance() {
        use crate::eval::metrics::auroc;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let make = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> (FeatureMatrix, Vec<usize>) {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            (FeatureMatrix::from_rows(&rows).unwrap(), y)
        };
        let (x_train, y_train) = make(&mut rng, 600);
        let (x_test, y_test) = make(&mut rng, 1200);
        let model = fit_logistic(&x_train, &y_train, 2, &LogisticConfig::default()).unwrap();
        let p = model.predict_proba(&x_test).unwrap();
        let scores: Vec<f64> = (0..p.rows()).map(|r| p.get(r, 1)).collect();
        let auc = auroc(&scores, &y_test).unwrap();
        assert!((auc - 0.5).abs() < 0.05, "auroc {auc}");
    }
}
