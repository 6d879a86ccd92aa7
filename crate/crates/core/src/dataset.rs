use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::volume::ClassId;

/// Row-major table of real features with optional 1-based class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    values: Vec<f64>,
    labels: Option<Vec<ClassId>>,
    /// Source voxel index of each row, when the rows were cut from a volume.
    provenance: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        values: Vec<f64>,
        labels: Option<Vec<ClassId>>,
    ) -> Result<Self> {
        let nf = feature_names.len();
        if nf == 0 {
            if !values.is_empty() {
                return Err(Error::SizeMismatch("values given for zero features".into()));
            }
        } else if values.len() % nf != 0 {
            return Err(Error::SizeMismatch(format!(
                "{} values is not a multiple of {nf} features",
                values.len()
            )));
        }
        let n_rows = if nf == 0 { 0 } else { values.len() / nf };
        if let Some(l) = &labels {
            if l.len() != n_rows {
                return Err(Error::SizeMismatch(format!(
                    "{} labels for {n_rows} rows",
                    l.len()
                )));
            }
            if l.contains(&0) {
                return Err(Error::InvalidParameter("dataset labels must be >= 1".into()));
            }
        }
        Ok(Dataset {
            feature_names,
            values,
            labels,
            provenance: None,
        })
    }

    pub fn from_rows(
        feature_names: Vec<String>,
        rows: &[Vec<f64>],
        labels: Option<Vec<ClassId>>,
    ) -> Result<Self> {
        let nf = feature_names.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != nf) {
            return Err(Error::SizeMismatch(format!(
                "row {i} has {} entries, expected {nf}",
                r.len()
            )));
        }
        Dataset::new(feature_names, rows.concat(), labels)
    }

    pub fn with_provenance(mut self, provenance: Vec<usize>) -> Result<Self> {
        if provenance.len() != self.n_rows() {
            return Err(Error::SizeMismatch(format!(
                "{} provenance entries for {} rows",
                provenance.len(),
                self.n_rows()
            )));
        }
        self.provenance = Some(provenance);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        if self.feature_names.is_empty() {
            0
        } else {
            self.values.len() / self.feature_names.len()
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let nf = self.n_features();
        &self.values[i * nf..(i + 1) * nf]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // zero features never reach here with rows, chunks_exact(0) would panic
        self.values.chunks_exact(self.n_features().max(1))
    }

    pub fn labels(&self) -> Option<&[ClassId]> {
        self.labels.as_deref()
    }

    pub fn provenance(&self) -> Option<&[usize]> {
        self.provenance.as_deref()
    }

    /// Labels, or an error for unlabeled data.
    pub fn require_labels(&self) -> Result<&[ClassId]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("dataset has no labels".into()))
    }

    /// Number of classes implied by the labels (the largest id).
    pub fn n_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |&m| usize::from(m))
    }

    /// Per-class row counts, index 0 holding class 1.
    pub fn class_counts(&self, n_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; n_classes];
        if let Some(l) = &self.labels {
            for &c in l {
                if let Some(slot) = counts.get_mut(usize::from(c) - 1) {
                    *slot += 1;
                }
            }
        }
        counts
    }

    /// Selects rows by index, keeping labels and provenance aligned.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let nf = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * nf);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            values,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            provenance: self
                .provenance
                .as_ref()
                .map(|p| indices.iter().map(|&i| p[i]).collect()),
        }
    }

    /// Concatenates two datasets with identical columns.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.feature_names != other.feature_names {
            return Err(Error::SizeMismatch("datasets have different columns".into()));
        }
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some([a.as_slice(), b.as_slice()].concat()),
            (None, None) => None,
            _ => return Err(Error::InvalidParameter("cannot mix labeled and unlabeled rows".into())),
        };
        Dataset::new(
            self.feature_names.clone(),
            [self.values.as_slice(), other.values.as_slice()].concat(),
            labels,
        )
    }

    /// Splits row indices into train/test parts, stratified by class.
    ///
    /// Each class is shuffled independently and `train_fraction` of it (rounded)
    /// goes to the training side. Both index lists come back sorted.
    pub fn stratified_split(&self, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::InvalidParameter(format!(
                "train fraction {train_fraction} outside [0, 1]"
            )));
        }
        let labels = self.require_labels()?;
        let k = self.n_classes();
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &c) in labels.iter().enumerate() {
            by_class[usize::from(c) - 1].push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for mut members in by_class {
            members.shuffle(&mut rng);
            let n_train = (members.len() as f64 * train_fraction).round() as usize;
            train.extend_from_slice(&members[..n_train]);
            test.extend_from_slice(&members[n_train..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }
}
