//! Multinomial logistic regression and one-vs-rest linear SVM.
//!
//! Both share [`LinearModel`]: one weight row and intercept per class, with
//! prediction by argmax of `w_c . x + b_c`. Training is mini-batch
//! (sub-)gradient descent from zero weights with a seeded shuffle per epoch.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::volume::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Logistic,
    Svm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Inverse regularization strength; the L2 penalty is `1 / (2 C n) |w|^2`.
    pub c: f64,
    pub batch_size: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            epochs: 200,
            learning_rate: 0.01,
            c: 1.0,
            batch_size: 32,
        }
    }
}

fn check_schedule(epochs: usize, lr: f64, batch: usize) -> Result<()> {
    if epochs == 0 || batch == 0 {
        return Err(Error::InvalidParameter(
            "epochs and batch_size must be >= 1".into(),
        ));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    /// `n_classes x n_features`, row-major.
    pub weights: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub n_features: usize,
    /// Training objective on the full set after each epoch.
    pub loss_history: Vec<f64>,
}

impl LinearModel {
    /// All-zero model.
    pub fn zeros(kind: LinearKind, n_features: usize, n_classes: usize) -> Self {
        LinearModel {
            kind,
            weights: vec![0.0; n_features * n_classes],
            intercepts: vec![0.0; n_classes],
            n_features,
            loss_history: Vec::new(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.intercepts.len()
    }

    fn scores_into(&self, row: &[f64], out: &mut [f64]) {
        let nf = self.n_features;
        for (c, o) in out.iter_mut().enumerate() {
            let w = &self.weights[c * nf..(c + 1) * nf];
            *o = self.intercepts[c] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Per-class logits (logistic) or margins (SVM).
    pub fn scores(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: row.len(),
            });
        }
        let mut out = vec![0.0; self.n_classes()];
        self.scores_into(row, &mut out);
        Ok(out)
    }

    /// Softmax of [`scores`](Self::scores).
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut s = self.scores(row)?;
        super::softmax_in_place(&mut s);
        Ok(s)
    }

    pub fn predict(&self, row: &[f64]) -> Result<ClassId> {
        Ok(super::forest::argmax(&self.scores(row)?))
    }
}

fn epoch_order(n: usize, rng: &mut ChaCha8Rng, order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..n);
    order.shuffle(rng);
}

/// Mean softmax cross-entropy of `m` over `data`.
fn cross_entropy(m: &LinearModel, data: &Dataset, labels: &[ClassId]) -> f64 {
    let mut s = vec![0.0; m.n_classes()];
    let mut total = 0.0;
    for (row, &l) in data.rows().zip(labels) {
        m.scores_into(row, &mut s);
        total += super::log_sum_exp(&s) - s[usize::from(l) - 1];
    }
    total / data.n_rows() as f64
}

pub fn logistic_fit(data: &Dataset, params: &LogisticParams, seed: u64) -> Result<LinearModel> {
    check_schedule(params.epochs, params.learning_rate, params.batch_size)?;
    let labels = data.require_labels()?;
    if data.is_empty() {
        return Err(Error::Empty("logistic regression needs at least one row".into()));
    }
    let nf = data.n_features();
    let k = data.n_classes();
    let mut m = LinearModel::zeros(LinearKind::Logistic, nf, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::new();
    let mut gw = vec![0.0; k * nf];
    let mut gb = vec![0.0; k];
    let mut p = vec![0.0; k];
    for epoch in 0..params.epochs {
        epoch_order(data.n_rows(), &mut rng, &mut order);
        for batch in order.chunks(params.batch_size) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let row = data.row(i);
                m.scores_into(row, &mut p);
                super::softmax_in_place(&mut p);
                p[usize::from(labels[i]) - 1] -= 1.0;
                for c in 0..k {
                    gb[c] += p[c];
                    for (g, &x) in gw[c * nf..(c + 1) * nf].iter_mut().zip(row) {
                        *g += p[c] * x;
                    }
                }
            }
            let step = params.learning_rate / batch.len() as f64;
            for (w, g) in m.weights.iter_mut().zip(&gw) {
                *w -= step * g;
            }
            for (b, g) in m.intercepts.iter_mut().zip(&gb) {
                *b -= step * g;
            }
        }
        let loss = cross_entropy(&m, data, labels);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        m.loss_history.push(loss);
    }
    Ok(m)
}

/// Hinge loss `max(0, 1 - y (w . x + b))` for `y` in {-1, +1} and its
/// sub-gradient with respect to `(w, b)`. Points with margin >= 1 give zero.
pub fn hinge_loss_grad(w: &[f64], b: f64, x: &[f64], y: f64) -> (f64, Vec<f64>, f64) {
    let margin = y * (b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>());
    if margin >= 1.0 {
        (0.0, vec![0.0; w.len()], 0.0)
    } else {
        (1.0 - margin, x.iter().map(|&v| -y * v).collect(), -y)
    }
}

pub fn svm_fit(data: &Dataset, params: &SvmParams, seed: u64) -> Result<LinearModel> {
    check_schedule(params.epochs, params.learning_rate, params.batch_size)?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidParameter(format!("svm: C must be positive, got {}", params.c)));
    }
    let labels = data.require_labels()?;
    if data.is_empty() {
        return Err(Error::Empty("svm needs at least one row".into()));
    }
    let n = data.n_rows();
    let nf = data.n_features();
    let k = data.n_classes();
    let counts = data.class_counts(k);
    let mut m = LinearModel::zeros(LinearKind::Svm, nf, k);
    let present = counts.iter().filter(|&&c| c > 0).count();
    for c in 0..k {
        if counts[c] == 0 {
            m.intercepts[c] = -1.0;
        } else if present == 1 {
            m.intercepts[c] = 1.0;
        }
    }
    if present == 1 {
        return Ok(m);
    }

    let lambda = 1.0 / (params.c * n as f64);
    let sign = |i: usize, c: usize| if usize::from(labels[i]) - 1 == c { 1.0 } else { -1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::new();
    let mut gw = vec![0.0; k * nf];
    let mut gb = vec![0.0; k];
    let mut s = vec![0.0; k];
    for epoch in 0..params.epochs {
        epoch_order(n, &mut rng, &mut order);
        for batch in order.chunks(params.batch_size) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let row = data.row(i);
                m.scores_into(row, &mut s);
                for c in (0..k).filter(|&c| counts[c] > 0) {
                    let y = sign(i, c);
                    if y * s[c] < 1.0 {
                        gb[c] -= y;
                        for (g, &x) in gw[c * nf..(c + 1) * nf].iter_mut().zip(row) {
                            *g -= y * x;
                        }
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for c in (0..k).filter(|&c| counts[c] > 0) {
                for j in 0..nf {
                    let w = &mut m.weights[c * nf + j];
                    *w -= params.learning_rate * (lambda * *w + gw[c * nf + j] * inv);
                }
                m.intercepts[c] -= params.learning_rate * gb[c] * inv;
            }
        }
        let mut objective = 0.5 * lambda * m.weights.iter().map(|w| w * w).sum::<f64>();
        for (i, row) in data.rows().enumerate() {
            m.scores_into(row, &mut s);
            for c in (0..k).filter(|&c| counts[c] > 0) {
                objective += (1.0 - sign(i, c) * s[c]).max(0.0) / n as f64;
            }
        }
        if !objective.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        m.loss_history.push(objective);
    }
    Ok(m)
}
