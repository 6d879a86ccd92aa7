use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

const STD_FLOOR: f64 = 1e-9;

/// Per-feature affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("cannot standardize an empty dataset".into()));
        }
        let nf = data.n_features();
        let n = data.n_rows() as f64;
        let mut means = vec![0.0; nf];
        let mut lo = vec![f64::INFINITY; nf];
        let mut hi = vec![f64::NEG_INFINITY; nf];
        for row in data.rows() {
            for j in 0..nf {
                means[j] += row[j];
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        for j in 0..nf {
            // a constant column keeps its exact value so it maps to exactly 0
            means[j] = if lo[j] == hi[j] { lo[j] } else { means[j] / n };
        }
        let mut stds = vec![0.0; nf];
        for row in data.rows() {
            for j in 0..nf {
                let d = row[j] - means[j];
                stds[j] += d * d;
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt().max(STD_FLOOR);
        }
        Ok(Standardizer { means, stds })
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    #[inline]
    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, &x), &m), &s) in out.iter_mut().zip(row).zip(&self.means).zip(&self.stds) {
            *o = (x - m) / s;
        }
    }

    pub fn invert_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, &z), &m), &s) in out.iter_mut().zip(row).zip(&self.means).zip(&self.stds) {
            *o = z * s + m;
        }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: data.n_features(),
            });
        }
        let mut values = vec![0.0; data.values().len()];
        for (out, row) in values.chunks_exact_mut(self.n_features().max(1)).zip(data.rows()) {
            self.apply_row(row, out);
        }
        let ds = Dataset::new(
            data.feature_names().to_vec(),
            values,
            data.labels().map(<[_]>::to_vec),
        )?;
        match data.provenance() {
            Some(p) => ds.with_provenance(p.to_vec()),
            None => Ok(ds),
        }
    }
}
