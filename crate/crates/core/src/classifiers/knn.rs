//! Exact k-nearest-neighbour majority vote under Euclidean distance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::volume::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

/// Stores the training set verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    n_features: usize,
    n_classes: usize,
    values: Vec<f64>,
    labels: Vec<ClassId>,
}

impl KnnModel {
    pub fn fit(data: &Dataset, params: &KnnParams) -> Result<Self> {
        let labels = data.require_labels()?;
        if params.k == 0 {
            return Err(Error::InvalidParameter("knn: k must be >= 1".into()));
        }
        if params.k > data.n_rows() {
            return Err(Error::InvalidParameter(format!(
                "knn: k = {} exceeds the {} training rows",
                params.k,
                data.n_rows()
            )));
        }
        Ok(KnnModel {
            k: params.k,
            n_features: data.n_features(),
            n_classes: data.n_classes(),
            values: data.values().to_vec(),
            labels: labels.to_vec(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Training indices of the `k` nearest rows, closest first; equal
    /// distances are ordered by index.
    pub fn neighbours(&self, row: &[f64]) -> Result<Vec<usize>> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: row.len(),
            });
        }
        let mut heap = BinaryHeap::with_capacity(self.k + 1);
        for (index, train) in self.values.chunks_exact(self.n_features.max(1)).enumerate() {
            let dist: f64 = train.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
            let c = Candidate { dist, index };
            if heap.len() < self.k {
                heap.push(c);
            } else if c < *heap.peek().expect("heap holds k items") {
                heap.pop();
                heap.push(c);
            }
        }
        Ok(heap.into_sorted_vec().into_iter().map(|c| c.index).collect())
    }

    /// Fraction of the `k` neighbours in each class.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut votes = vec![0.0; self.n_classes];
        for i in self.neighbours(row)? {
            votes[usize::from(self.labels[i]) - 1] += 1.0;
        }
        let k = self.k as f64;
        votes.iter_mut().for_each(|v| *v /= k);
        Ok(votes)
    }

    /// Majority class among the neighbours; vote ties go to the lowest id.
    pub fn predict(&self, row: &[f64]) -> Result<ClassId> {
        Ok(super::forest::argmax(&self.predict_proba(row)?))
    }
}
