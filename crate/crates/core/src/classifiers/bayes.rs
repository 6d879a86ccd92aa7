//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::volume::ClassId;

const VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    log_priors: Vec<f64>,
    /// `n_classes x n_features`, row-major.
    means: Vec<f64>,
    vars: Vec<f64>,
    n_features: usize,
}

impl NaiveBayesModel {
    pub fn fit(data: &Dataset) -> Result<Self> {
        let labels = data.require_labels()?;
        let k = data.n_classes();
        let nf = data.n_features();
        let counts = data.class_counts(k);
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidParameter(format!(
                "naive bayes: class {} has no training rows",
                c + 1
            )));
        }
        let mut means = vec![0.0; k * nf];
        for (row, &l) in data.rows().zip(labels) {
            let c = usize::from(l) - 1;
            for j in 0..nf {
                means[c * nf + j] += row[j];
            }
        }
        for c in 0..k {
            for j in 0..nf {
                means[c * nf + j] /= counts[c] as f64;
            }
        }
        let mut vars = vec![0.0; k * nf];
        for (row, &l) in data.rows().zip(labels) {
            let c = usize::from(l) - 1;
            for j in 0..nf {
                let d = row[j] - means[c * nf + j];
                vars[c * nf + j] += d * d;
            }
        }
        for c in 0..k {
            for j in 0..nf {
                vars[c * nf + j] = (vars[c * nf + j] / counts[c] as f64).max(VAR_FLOOR);
            }
        }
        let n = data.n_rows() as f64;
        Ok(NaiveBayesModel {
            log_priors: counts.iter().map(|&c| (c as f64 / n).ln()).collect(),
            means,
            vars,
            n_features: nf,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.log_priors.len()
    }

    /// Unnormalized log posterior per class.
    pub fn log_joint(&self, row: &[f64]) -> Result<Vec<f64>> {
        let nf = self.n_features;
        if row.len() != nf {
            return Err(Error::DimensionMismatch {
                expected: nf,
                actual: row.len(),
            });
        }
        Ok((0..self.n_classes())
            .map(|c| {
                let mut lp = self.log_priors[c];
                for j in 0..nf {
                    let v = self.vars[c * nf + j];
                    let d = row[j] - self.means[c * nf + j];
                    lp -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + d * d / v);
                }
                lp
            })
            .collect())
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut lj = self.log_joint(row)?;
        super::softmax_in_place(&mut lj);
        Ok(lj)
    }

    pub fn predict(&self, row: &[f64]) -> Result<ClassId> {
        Ok(super::forest::argmax(&self.log_joint(row)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_gaussians() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![if i < 20 { 0.0 } else { 5.0 } + (i % 5) as f64 * 0.1])
            .collect();
        let labels: Vec<ClassId> = (0..40).map(|i| if i < 20 { 1 } else { 2 }).collect();
        let d = Dataset::from_rows(vec!["x".into()], &rows, Some(labels)).unwrap();
        let m = NaiveBayesModel::fit(&d).unwrap();
        assert_eq!(m.predict(&[0.2]).unwrap(), 1);
        assert_eq!(m.predict(&[4.9]).unwrap(), 2);
        let p = m.predict_proba(&[2.6]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_is_floored() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 5.0], vec![1.0, 6.0]];
        let d = Dataset::from_rows(vec!["c".into(), "x".into()], &rows, Some(vec![1, 1, 2, 2])).unwrap();
        let m = NaiveBayesModel::fit(&d).unwrap();
        let lj = m.log_joint(&[1.0, 0.5]).unwrap();
        assert!(lj.iter().all(|v| v.is_finite()));
        assert_eq!(m.predict(&[1.0, 5.5]).unwrap(), 2);
    }

    #[test]
    fn empty_class_is_an_error() {
        let rows = vec![vec![0.0], vec![1.0]];
        let d = Dataset::from_rows(vec!["x".into()], &rows, Some(vec![1, 3])).unwrap();
        assert!(NaiveBayesModel::fit(&d).is_err());
    }
}
