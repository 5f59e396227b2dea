use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::AnnotateError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.1,
            l2_lambda: 1e-4,
            max_epochs: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// One row per class, one column per feature.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub classes: Vec<String>,
    pub hyperparams: Hyperparams,
    /// Objective before training followed by the objective after each epoch.
    pub loss_history: Vec<f64>,
}

impl LogRegModel {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("history holds the initial loss")
    }

    pub fn epochs(&self) -> usize {
        self.loss_history.len() - 1
    }

    pub fn feature_count(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        logits(&self.weights, &self.bias, x)
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }
}

fn logits(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter()
        .zip(b)
        .map(|(row, bias)| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias)
        .collect()
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean cross-entropy plus `lambda/2 * ||W||^2` (bias unpenalized), and the
/// exact gradients with respect to `w` and `b`.
pub fn loss_and_gradient(
    w: &[Vec<f64>],
    b: &[f64],
    x: &[Vec<f64>],
    y: &[usize],
    lambda: f64,
) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let (data, mut gw, gb) = data_loss_and_gradient(w, b, x, y);
    let mut penalty = 0.0;
    for (grow, wrow) in gw.iter_mut().zip(w) {
        for (g, v) in grow.iter_mut().zip(wrow) {
            *g += lambda * v;
            penalty += v * v;
        }
    }
    (data + 0.5 * lambda * penalty, gw, gb)
}

fn data_loss_and_gradient(w: &[Vec<f64>], b: &[f64], x: &[Vec<f64>], y: &[usize]) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let n = x.len() as f64;
    let d = w.first().map_or(0, Vec::len);
    let mut gw = vec![vec![0.0; d]; w.len()];
    let mut gb = vec![0.0; w.len()];
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let z = logits(w, b, xi);
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[yi];
        for (k, zk) in z.iter().enumerate() {
            let r = ((zk - lse).exp() - if k == yi { 1.0 } else { 0.0 }) / n;
            gb[k] += r;
            for (g, xv) in gw[k].iter_mut().zip(xi) {
                *g += r * xv;
            }
        }
    }
    (loss / n, gw, gb)
}

fn objective(w: &[Vec<f64>], b: &[f64], x: &[Vec<f64>], y: &[usize], lambda: f64) -> f64 {
    loss_and_gradient(w, b, x, y, lambda).0
}

/// Full-batch proximal gradient descent on the regularized objective: a
/// gradient step on the data term, then the closed-form L2 prox
/// `W / (1 + lr * lambda)`. The prox keeps large penalties stable; with
/// L2-normalized features the data gradient is 1-Lipschitz, so any
/// `learning_rate <= 1` decreases the objective every epoch.
///
/// Examples are visited in a canonical order (by label, then features), so
/// permuting the training set cannot change the result.
pub fn train_logreg(
    x: &[Vec<f64>],
    y: &[usize],
    classes: &[String],
    hp: Hyperparams,
) -> Result<LogRegModel, AnnotateError> {
    if x.len() != y.len() {
        return Err(AnnotateError::Training(format!("{} inputs but {} labels", x.len(), y.len())));
    }
    if classes.len() < 2 {
        return Err(AnnotateError::SingleClass);
    }
    if x.len() < classes.len() {
        return Err(AnnotateError::Training(format!(
            "{} examples for {} classes",
            x.len(),
            classes.len()
        )));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(AnnotateError::Training("ragged feature matrix".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= classes.len()) {
        return Err(AnnotateError::Training(format!("label index {bad} out of range")));
    }
    for (k, name) in classes.iter().enumerate() {
        if !y.contains(&k) {
            return Err(AnnotateError::Training(format!("class {name} has no examples")));
        }
    }
    if !(hp.learning_rate > 0.0 && hp.l2_lambda >= 0.0 && hp.tol >= 0.0) {
        return Err(AnnotateError::Training("learning_rate must be positive, l2_lambda and tol non-negative".into()));
    }

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        y[a].cmp(&y[b]).then_with(|| {
            x[a].iter()
                .zip(&x[b])
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();

    let k = classes.len();
    let mut w = vec![vec![0.0; d]; k];
    let mut b = vec![0.0; k];
    let lr = hp.learning_rate;
    let shrink = 1.0 / (1.0 + lr * hp.l2_lambda);
    let mut history = vec![objective(&w, &b, &xs, &ys, hp.l2_lambda)];
    for epoch in 1..=hp.max_epochs {
        let (_, gw, gb) = data_loss_and_gradient(&w, &b, &xs, &ys);
        for (wrow, grow) in w.iter_mut().zip(&gw) {
            for (v, g) in wrow.iter_mut().zip(grow) {
                *v = (*v - lr * g) * shrink;
            }
        }
        for (v, g) in b.iter_mut().zip(&gb) {
            *v -= lr * g;
        }
        let loss = objective(&w, &b, &xs, &ys, hp.l2_lambda);
        if !loss.is_finite() {
            return Err(AnnotateError::Diverged { epoch });
        }
        let prev = *history.last().expect("non-empty");
        history.push(loss);
        if prev - loss < hp.tol {
            break;
        }
    }
    Ok(LogRegModel {
        weights: w,
        bias: b,
        classes: classes.to_vec(),
        hyperparams: hp,
        loss_history: history,
    })
}
