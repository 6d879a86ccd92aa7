//! Fully connected networks: ReLU hidden layers, softmax output,
//! cross-entropy loss, plain mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::volume::ClassId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl NetParams {
    /// One hidden layer of 64 units.
    pub fn mlp() -> Self {
        NetParams {
            hidden: vec![64],
            epochs: 30,
            learning_rate: 0.05,
            batch_size: 64,
        }
    }

    /// Three hidden layers of 64 units.
    pub fn dnn() -> Self {
        NetParams {
            hidden: vec![64, 64, 64],
            ..NetParams::mlp()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("net: {m}")));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden layers must be non-empty and positive, got {:?}", self.hidden));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        Ok(())
    }
}

/// Weights of layer `l` are stored input-major: entry `i * sizes[l + 1] + o`
/// connects input `i` to output `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNetModel {
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub params: Option<NetParams>,
    pub seed: u64,
    /// Mean mini-batch loss per epoch.
    pub loss_history: Vec<f64>,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Per-thread buffers for forward and backward passes.
#[derive(Debug, Clone, Default)]
pub struct NetScratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl DenseNetModel {
    /// He-initialized network for the given layer sizes (input, hidden.., classes).
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!("net: bad layer sizes {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let normal = Normal::new(0.0, (2.0 / sizes[l] as f64).sqrt())
                .expect("positive standard deviation");
            weights.push((0..sizes[l] * sizes[l + 1]).map(|_| normal.sample(&mut rng)).collect());
            biases.push(vec![0.0; sizes[l + 1]]);
        }
        Ok(DenseNetModel {
            sizes: sizes.to_vec(),
            weights,
            biases,
            params: None,
            seed,
            loss_history: Vec::new(),
        })
    }

    /// Checks that every weight and bias array matches `sizes`.
    pub fn validate(&self) -> Result<()> {
        let layers = self.sizes.len().saturating_sub(1);
        let ok = layers >= 1
            && self.weights.len() == layers
            && self.biases.len() == layers
            && (0..layers).all(|l| {
                self.weights[l].len() == self.sizes[l] * self.sizes[l + 1]
                    && self.biases[l].len() == self.sizes[l + 1]
            });
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "net: parameter shapes do not chain for sizes {:?}",
                self.sizes
            )))
        }
    }

    pub fn n_features(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn prepare(&self, s: &mut NetScratch) {
        if s.acts.len() != self.sizes.len() {
            s.acts = self.sizes.iter().map(|&n| vec![0.0; n]).collect();
            s.deltas = self.sizes.iter().map(|&n| vec![0.0; n]).collect();
        }
    }

    /// Forward pass; leaves the softmax output in `s.acts[last]`.
    fn forward(&self, row: &[f64], s: &mut NetScratch) {
        self.prepare(s);
        s.acts[0].copy_from_slice(row);
        let last = self.layers() - 1;
        for l in 0..=last {
            let (lo, hi) = s.acts.split_at_mut(l + 1);
            let (input, out) = (&lo[l], &mut hi[0]);
            let n_out = self.sizes[l + 1];
            out.copy_from_slice(&self.biases[l]);
            for (i, &a) in input.iter().enumerate() {
                if a != 0.0 {
                    axpy(a, &self.weights[l][i * n_out..(i + 1) * n_out], out);
                }
            }
            if l < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        super::softmax_in_place(&mut s.acts[last + 1]);
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: row.len(),
            });
        }
        Ok(())
    }

    pub fn predict_proba_into(&self, row: &[f64], s: &mut NetScratch, out: &mut [f64]) -> Result<()> {
        self.check_row(row)?;
        self.forward(row, s);
        out[..self.n_classes()].copy_from_slice(s.acts.last().expect("output layer"));
        Ok(())
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_classes()];
        self.predict_proba_into(row, &mut NetScratch::default(), &mut out)?;
        Ok(out)
    }

    pub fn predict(&self, row: &[f64]) -> Result<ClassId> {
        Ok(super::forest::argmax(&self.predict_proba(row)?))
    }

    /// Adds the gradient of one sample's loss to `g` and returns that loss.
    fn accumulate(&self, row: &[f64], label: ClassId, s: &mut NetScratch, g: &mut Gradients) -> f64 {
        self.forward(row, s);
        let last = self.layers();
        let y = usize::from(label) - 1;
        let loss = -s.acts[last][y].max(f64::MIN_POSITIVE).ln();
        s.deltas[last].copy_from_slice(&s.acts[last]);
        s.deltas[last][y] -= 1.0;
        for l in (0..last).rev() {
            let n_out = self.sizes[l + 1];
            let (dlo, dhi) = s.deltas.split_at_mut(l + 1);
            let delta = &dhi[0];
            axpy(1.0, delta, &mut g.biases[l]);
            for (i, &a) in s.acts[l].iter().enumerate() {
                if a != 0.0 {
                    axpy(a, delta, &mut g.weights[l][i * n_out..(i + 1) * n_out]);
                }
            }
            if l > 0 {
                for (i, d) in dlo[l].iter_mut().enumerate() {
                    *d = if s.acts[l][i] > 0.0 {
                        dot(&self.weights[l][i * n_out..(i + 1) * n_out], delta)
                    } else {
                        0.0
                    };
                }
            }
        }
        loss
    }

    fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Mean cross-entropy over `data` and its gradient with respect to
    /// every weight and bias.
    pub fn loss_and_gradients(&self, data: &Dataset) -> Result<(f64, Gradients)> {
        self.validate()?;
        let labels = data.require_labels()?;
        if data.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: data.n_features(),
            });
        }
        if data.is_empty() {
            return Err(Error::Empty("no rows for the loss".into()));
        }
        let mut g = self.zero_gradients();
        let mut s = NetScratch::default();
        let mut loss = 0.0;
        for (row, &l) in data.rows().zip(labels) {
            loss += self.accumulate(row, l, &mut s, &mut g);
        }
        let inv = 1.0 / data.n_rows() as f64;
        for v in g.weights.iter_mut().chain(g.biases.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= inv);
        }
        Ok((loss * inv, g))
    }

    pub fn fit(data: &Dataset, params: &NetParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let labels = data.require_labels()?;
        if data.is_empty() {
            return Err(Error::Empty("network needs at least one row".into()));
        }
        let mut sizes = vec![data.n_features()];
        sizes.extend(&params.hidden);
        sizes.push(data.n_classes());
        let mut m = DenseNetModel::init(&sizes, seed)?;
        m.params = Some(params.clone());

        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let mut order: Vec<usize> = (0..data.n_rows()).collect();
        let mut s = NetScratch::default();
        let mut g = m.zero_gradients();
        for epoch in 0..params.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(params.batch_size) {
                for v in g.weights.iter_mut().chain(g.biases.iter_mut()) {
                    v.iter_mut().for_each(|x| *x = 0.0);
                }
                for &i in batch {
                    epoch_loss += m.accumulate(data.row(i), labels[i], &mut s, &mut g);
                }
                let step = params.learning_rate / batch.len() as f64;
                for (w, gw) in m.weights.iter_mut().zip(&g.weights) {
                    axpy(-step, gw, w);
                }
                for (b, gb) in m.biases.iter_mut().zip(&g.biases) {
                    axpy(-step, gb, b);
                }
            }
            let mean = epoch_loss / data.n_rows() as f64;
            if !mean.is_finite() || m.weights.iter().flatten().any(|w| !w.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            m.loss_history.push(mean);
        }
        Ok(m)
    }
}
