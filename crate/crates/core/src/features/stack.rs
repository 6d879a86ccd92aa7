use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filters::{gaussian_blur_real, gradient_norm, local_stats, subtract};
use super::spec::{FeatureDescriptor, FeatureSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::volume::{GrayVolume, LabelVolume, RealVolume};

/// Whether filters see the whole volume or each z-slice on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    #[default]
    Volumetric,
    PerSlice,
}

/// `n_samples x n_features`, row-major; row `i` is voxel `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if names.is_empty() || data.len() % names.len() != 0 {
            return Err(Error::SizeMismatch(format!(
                "{} values for {} features",
                data.len(),
                names.len()
            )));
        }
        Ok(FeatureMatrix { names, data })
    }

    fn from_columns(names: Vec<String>, columns: &[RealVolume], rows: std::ops::Range<usize>) -> Self {
        let nf = columns.len();
        let start = rows.start;
        let mut data = vec![0.0; rows.len() * nf];
        data.par_chunks_mut(nf).enumerate().for_each(|(i, row)| {
            for (slot, col) in row.iter_mut().zip(columns) {
                *slot = col.data[start + i];
            }
        });
        FeatureMatrix { names, data }
    }

    pub fn n_samples(&self) -> usize {
        self.data.len() / self.names.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let nf = self.n_features();
        &self.data[i * nf..(i + 1) * nf]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.chunks_exact(self.n_features()).map(|r| r[j]).collect()
    }

    fn append(&mut self, other: FeatureMatrix) {
        self.data.extend(other.data);
    }

    pub fn into_dataset(self) -> Dataset {
        Dataset::new(self.names, self.data, None).expect("feature matrix shape is consistent")
    }
}

/// Computes every descriptor's column over `v`, sharing blurs between descriptors.
fn compute_columns(v: &GrayVolume, spec: &FeatureSpec) -> Result<Vec<RealVolume>> {
    let real = v.to_real();
    let mut blurs: HashMap<u64, RealVolume> = HashMap::new();
    let mut blur = |sigma: f64| -> Result<RealVolume> {
        if let Some(b) = blurs.get(&sigma.to_bits()) {
            return Ok(b.clone());
        }
        let b = gaussian_blur_real(&real, sigma)?;
        blurs.insert(sigma.to_bits(), b.clone());
        Ok(b)
    };
    let mut stats: HashMap<usize, (RealVolume, RealVolume)> = HashMap::new();
    let mut columns = Vec::with_capacity(spec.len());
    for d in spec.descriptors() {
        let col = match *d {
            FeatureDescriptor::Identity => v.to_real(),
            FeatureDescriptor::Gaussian { sigma } => blur(sigma)?,
            FeatureDescriptor::Dog { sigma1, sigma2 } => subtract(&blur(sigma1)?, &blur(sigma2)?),
            FeatureDescriptor::GradientMagnitude { sigma } => gradient_norm(&blur(sigma)?),
            FeatureDescriptor::LocalMean { radius } | FeatureDescriptor::LocalVariance { radius } => {
                if !stats.contains_key(&radius) {
                    stats.insert(radius, local_stats(v, radius)?);
                }
                let (m, var) = &stats[&radius];
                if matches!(d, FeatureDescriptor::LocalMean { .. }) {
                    m.clone()
                } else {
                    var.clone()
                }
            }
        };
        columns.push(col);
    }
    Ok(columns)
}

/// Computes the bank slab by slab and hands each slab's rows to `visit`
/// together with the index of its first voxel.
///
/// In volumetric mode each slab of `batch` slices is padded with
/// [`FeatureSpec::z_halo`] neighbouring slices, so the rows are bit-identical
/// to a whole-volume computation. In per-slice mode every slice is filtered
/// in isolation.
pub fn visit_feature_slabs(
    v: &GrayVolume,
    spec: &FeatureSpec,
    mode: FilterMode,
    batch: usize,
    mut visit: impl FnMut(usize, FeatureMatrix) -> Result<()>,
) -> Result<()> {
    let d = v.dims();
    let (batch, halo) = match mode {
        FilterMode::Volumetric => (batch.max(1), spec.z_halo()),
        FilterMode::PerSlice => (1, 0),
    };
    let s = d.slice_len();
    let names = spec.names();
    let mut z0 = 0;
    while z0 < d.nz {
        let z1 = (z0 + batch).min(d.nz);
        let lo = z0.saturating_sub(halo);
        let hi = (z1 + halo).min(d.nz);
        let slab = if lo == 0 && hi == d.nz {
            v.clone()
        } else {
            v.slab(lo, hi)
        };
        let columns = compute_columns(&slab, spec)?;
        let rows = (z0 - lo) * s..(z1 - lo) * s;
        visit(z0 * s, FeatureMatrix::from_columns(names.clone(), &columns, rows))?;
        z0 = z1;
    }
    Ok(())
}

/// Feature stack computed in slabs of `batch` slices (see [`visit_feature_slabs`]).
pub fn build_feature_stack_with(
    v: &GrayVolume,
    spec: &FeatureSpec,
    mode: FilterMode,
    batch: usize,
) -> Result<FeatureMatrix> {
    let mut out: Option<FeatureMatrix> = None;
    visit_feature_slabs(v, spec, mode, batch, |_, m| {
        match out.as_mut() {
            Some(acc) => acc.append(m),
            None => out = Some(m),
        }
        Ok(())
    })?;
    Ok(out.expect("volumes have at least one slice"))
}

/// One row per voxel (linear-index order), one column per descriptor.
pub fn build_feature_stack(v: &GrayVolume, spec: &FeatureSpec) -> Result<FeatureMatrix> {
    let columns = compute_columns(v, spec)?;
    Ok(FeatureMatrix::from_columns(spec.names(), &columns, 0..v.dims().len()))
}

/// Rows whose label is nonzero, with their voxel indices kept as provenance.
pub fn extract_labeled_rows(fm: &FeatureMatrix, lv: &LabelVolume) -> Result<Dataset> {
    if fm.n_samples() != lv.dims().len() {
        return Err(Error::SizeMismatch(format!(
            "{} feature rows for {} voxels",
            fm.n_samples(),
            lv.dims().len()
        )));
    }
    let picked: Vec<usize> = lv
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != 0)
        .map(|(i, _)| i)
        .collect();
    let mut values = Vec::with_capacity(picked.len() * fm.n_features());
    for &i in &picked {
        values.extend_from_slice(fm.row(i));
    }
    let labels = picked.iter().map(|&i| lv.labels()[i]).collect();
    Dataset::new(fm.names().to_vec(), values, Some(labels))?.with_provenance(picked)
}
