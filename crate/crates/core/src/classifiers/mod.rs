//! Supervised classifiers sharing one train/predict contract.
//!
//! Class ids are 1-based everywhere; probability vectors hold class `c` at
//! index `c - 1`. All ties resolve to the lowest class id.

pub mod bayes;
pub mod forest;
pub mod knn;
pub mod linear;
pub mod model;
pub mod net;
pub mod standardize;

pub use bayes::NaiveBayesModel;
pub use forest::{gini, ForestParams, RandomForestModel, TreeNode};
pub use knn::{KnnModel, KnnParams};
pub use linear::{hinge_loss_grad, logistic_fit, svm_fit, LinearKind, LinearModel, LogisticParams, SvmParams};
pub use model::{Algorithm, AlgorithmConfig, Model, PredictScratch, TrainedClassifier, MODEL_FORMAT_VERSION};
pub use net::{DenseNetModel, Gradients, NetParams, NetScratch};
pub use standardize::Standardizer;

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    v.iter_mut().for_each(|x| *x /= total);
}
