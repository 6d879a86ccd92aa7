use crate::error::{Error, Result};
use crate::volume::ClassId;

/// Fraction of positions where `pred` equals `truth`.
pub fn compute_accuracy(pred: &[ClassId], truth: &[ClassId]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("accuracy of zero predictions".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// `k x k` counts; entry `[i][j]` counts rows with truth `i + 1` predicted as `j + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn trace(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }
}

pub fn confusion_matrix(pred: &[ClassId], truth: &[ClassId], k: usize) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let mut counts = vec![vec![0; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        for l in [p, t] {
            if l == 0 || usize::from(l) > k {
                return Err(Error::UnknownLabel(format!("{l} outside 1..={k}")));
            }
        }
        counts[usize::from(t) - 1][usize::from(p) - 1] += 1;
    }
    Ok(ConfusionMatrix { counts })
}
