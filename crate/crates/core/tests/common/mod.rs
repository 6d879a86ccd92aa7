//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rockseg::classifiers::DenseNetModel;
use rockseg::{ClassId, Dataset, Dims, RealVolume};

/// Direct triple-sum 3D convolution with the outer product of `kernel`,
/// clamping coordinates at the borders.
pub fn brute_force_blur(data: &[f64], dims: Dims, kernel: &[f64]) -> Vec<f64> {
    let half = (kernel.len() / 2) as i64;
    let clamp = |i: usize, k: i64, n: usize| (i as i64 + k).clamp(0, n as i64 - 1) as usize;
    let mut out = vec![0.0; dims.len()];
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                let mut acc = 0.0;
                for (c, &wz) in kernel.iter().enumerate() {
                    for (b, &wy) in kernel.iter().enumerate() {
                        for (a, &wx) in kernel.iter().enumerate() {
                            let xx = clamp(x, a as i64 - half, dims.nx);
                            let yy = clamp(y, b as i64 - half, dims.ny);
                            let zz = clamp(z, c as i64 - half, dims.nz);
                            acc += wx * wy * wz * data[dims.index(xx, yy, zz)];
                        }
                    }
                }
                out[dims.index(x, y, z)] = acc;
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &RealVolume, b: &[f64]) -> f64 {
    a.data.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exhaustive k-nearest-neighbour vote: every squared distance is computed,
/// rows are sorted by (distance, index) and the first `k` vote; vote ties go
/// to the lowest class id.
pub fn knn_oracle(train: &Dataset, k: usize, query: &[f64]) -> (Vec<usize>, ClassId) {
    let labels = train.labels().unwrap();
    let mut d: Vec<(f64, usize)> = train
        .rows()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest: Vec<usize> = d[..k].iter().map(|&(_, i)| i).collect();
    let n_classes = usize::from(*labels.iter().max().unwrap());
    let mut votes = vec![0usize; n_classes];
    for &i in &nearest {
        votes[usize::from(labels[i]) - 1] += 1;
    }
    let best = votes.iter().max().unwrap();
    let class = votes.iter().position(|v| v == best).unwrap() + 1;
    (nearest, class as ClassId)
}

/// Largest relative error between analytic gradients and central finite
/// differences of the mean cross-entropy, over every weight and bias.
pub fn gradient_check(net: &DenseNetModel, data: &Dataset, h: f64) -> f64 {
    let (_, grads) = net.loss_and_gradients(data).unwrap();
    let loss = |m: &DenseNetModel| m.loss_and_gradients(data).unwrap().0;
    let rel = |analytic: f64, numeric: f64| (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6);
    let mut worst: f64 = 0.0;
    for l in 0..net.weights.len() {
        for i in 0..net.weights[l].len() {
            let mut plus = net.clone();
            plus.weights[l][i] += h;
            let mut minus = net.clone();
            minus.weights[l][i] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            worst = worst.max(rel(grads.weights[l][i], numeric));
        }
        for i in 0..net.biases[l].len() {
            let mut plus = net.clone();
            plus.biases[l][i] += h;
            let mut minus = net.clone();
            minus.biases[l][i] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            worst = worst.max(rel(grads.biases[l][i], numeric));
        }
    }
    worst
}

/// Confusion matrix trace over total, counted with a plain loop.
pub fn trace_accuracy(pred: &[ClassId], truth: &[ClassId], k: usize) -> f64 {
    let mut m = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        m[usize::from(t) - 1][usize::from(p) - 1] += 1;
    }
    let trace: usize = (0..k).map(|i| m[i][i]).sum();
    trace as f64 / pred.len() as f64
}

/// Smallest |pre-activation| over every hidden unit and row; finite
/// differences are only meaningful when this exceeds the step.
pub fn min_hidden_preactivation(net: &DenseNetModel, data: &Dataset) -> f64 {
    let mut smallest = f64::INFINITY;
    for row in data.rows() {
        let mut a = row.to_vec();
        for l in 0..net.weights.len() - 1 {
            let out = net.sizes[l + 1];
            let z: Vec<f64> = (0..out)
                .map(|o| net.biases[l][o] + a.iter().enumerate().map(|(i, x)| x * net.weights[l][i * out + o]).sum::<f64>())
                .collect();
            smallest = z.iter().fold(smallest, |m, v| m.min(v.abs()));
            a = z.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    smallest
}
