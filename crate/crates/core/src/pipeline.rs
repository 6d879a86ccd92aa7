//! Sparse-label training and whole-stack segmentation.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifiers::forest::argmax;
use crate::classifiers::model::{parse_json, read_version};
use crate::classifiers::{AlgorithmConfig, TrainedClassifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{visit_feature_slabs, FeatureSpec, FilterMode};
use crate::io::write_pgm;
use crate::volume::{ClassCatalog, ClassId, GrayVolume, LabelVolume, RealVolume};

pub const SEGMENTER_FORMAT_VERSION: u32 = 1;

/// What to do when a catalog class has no labeled voxels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingClassPolicy {
    #[default]
    Error,
    Warn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub filter_mode: FilterMode,
    /// Slices per feature slab.
    pub batch_slices: usize,
    pub missing_class: MissingClassPolicy,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            filter_mode: FilterMode::Volumetric,
            batch_slices: 16,
            missing_class: MissingClassPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Labeled rows per class, index 0 holding class 1.
    pub class_counts: Vec<usize>,
    pub training_accuracy: f64,
    pub feature_time_s: f64,
    pub train_time_s: f64,
    pub workers: usize,
    pub warnings: Vec<String>,
}

/// A classifier bundled with the features and classes it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterModel {
    pub classifier: TrainedClassifier,
    pub spec: FeatureSpec,
    pub catalog: ClassCatalog,
    pub filter_mode: FilterMode,
}

#[derive(Serialize, Deserialize)]
struct SegmenterDocument {
    version: u32,
    segmenter: SegmenterModel,
}

/// Labeled feature rows of `v` under mask `lv`, computed slab by slab.
pub fn labeled_feature_rows(
    v: &GrayVolume,
    lv: &LabelVolume,
    spec: &FeatureSpec,
    mode: FilterMode,
    batch_slices: usize,
) -> Result<Dataset> {
    if v.dims() != lv.dims() {
        return Err(Error::SizeMismatch(format!(
            "volume {} and labels {} differ",
            v.dims(),
            lv.dims()
        )));
    }
    let nf = spec.len();
    let labels = lv.labels();
    let mut values = Vec::new();
    let mut picked = Vec::new();
    let mut classes = Vec::new();
    visit_feature_slabs(v, spec, mode, batch_slices, |start, fm| {
        for r in 0..fm.n_samples() {
            let l = labels[start + r];
            if l != 0 {
                values.extend_from_slice(fm.row(r));
                picked.push(start + r);
                classes.push(l);
            }
        }
        Ok(())
    })?;
    debug_assert_eq!(values.len(), picked.len() * nf);
    Dataset::new(spec.names(), values, Some(classes))?.with_provenance(picked)
}

/// Builds features, extracts the labeled voxels of `lv` and fits `config`.
pub fn train_segmenter(
    v: &GrayVolume,
    lv: &LabelVolume,
    catalog: &ClassCatalog,
    spec: &FeatureSpec,
    config: &AlgorithmConfig,
    seed: u64,
    opts: &TrainOptions,
) -> Result<(SegmenterModel, TrainingReport)> {
    lv.validate(catalog)?;
    if lv.labeled_count() == 0 {
        return Err(Error::NoLabels);
    }
    let mut warnings = Vec::new();
    let mut counts = vec![0usize; catalog.len()];
    for &l in lv.labels().iter().filter(|&&l| l != 0) {
        counts[usize::from(l) - 1] += 1;
    }
    for (entry, &c) in catalog.entries().iter().zip(&counts) {
        if c == 0 {
            match opts.missing_class {
                MissingClassPolicy::Error => {
                    return Err(Error::MissingClass {
                        id: entry.id,
                        name: entry.name.clone(),
                    })
                }
                MissingClassPolicy::Warn => {
                    warnings.push(format!("class {} ({}) has no labeled voxels", entry.id, entry.name))
                }
            }
        }
    }

    let t = Instant::now();
    let data = labeled_feature_rows(v, lv, spec, opts.filter_mode, opts.batch_slices)?;
    let feature_time_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let classifier = TrainedClassifier::fit(&data, config, seed)?;
    let train_time_s = t.elapsed().as_secs_f64();

    let predicted = classifier.predict_dataset(&data)?;
    let hits = predicted
        .iter()
        .zip(data.labels().expect("labeled rows"))
        .filter(|(a, b)| a == b)
        .count();
    let model = SegmenterModel {
        classifier,
        spec: spec.clone(),
        catalog: catalog.clone(),
        filter_mode: opts.filter_mode,
    };
    let report = TrainingReport {
        class_counts: counts,
        training_accuracy: hits as f64 / data.n_rows() as f64,
        feature_time_s,
        train_time_s,
        workers: rayon::current_num_threads(),
        warnings,
    };
    Ok((model, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentOptions {
    pub batch_slices: usize,
    pub with_probabilities: bool,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions {
            batch_slices: 16,
            with_probabilities: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub labels: LabelVolume,
    /// One volume per catalog class, present when requested.
    pub probabilities: Option<Vec<RealVolume>>,
    pub feature_time_s: f64,
    pub predict_time_s: f64,
    pub workers: usize,
}

impl SegmenterModel {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&SegmenterDocument {
            version: SEGMENTER_FORMAT_VERSION,
            segmenter: self.clone(),
        })
        .map_err(|e| Error::InvalidParameter(format!("cannot serialize segmenter: {e}")))
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let version = read_version(text, origin)?;
        if version != SEGMENTER_FORMAT_VERSION {
            return Err(Error::format(origin, format!("unsupported model version {version}")));
        }
        let doc: SegmenterDocument = parse_json(text, origin)?;
        let m = doc.segmenter;
        if m.classifier.n_features != m.spec.len() {
            return Err(Error::format(
                origin,
                format!(
                    "classifier expects {} features but the spec has {}",
                    m.classifier.n_features,
                    m.spec.len()
                ),
            ));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

/// Labels every voxel of `v`. Classes the classifier never saw get
/// probability 0.
pub fn segment_volume(m: &SegmenterModel, v: &GrayVolume, opts: &SegmentOptions) -> Result<Segmentation> {
    if m.classifier.n_features != m.spec.len() {
        return Err(Error::DimensionMismatch {
            expected: m.spec.len(),
            actual: m.classifier.n_features,
        });
    }
    let dims = v.dims();
    let k_model = m.classifier.n_classes;
    let k = m.catalog.len();
    if k_model > k {
        return Err(Error::InvalidParameter(format!(
            "classifier predicts {k_model} classes but the catalog has {k}"
        )));
    }
    let mut labels = vec![0 as ClassId; dims.len()];
    let mut probs = opts
        .with_probabilities
        .then(|| vec![RealVolume::zeros(dims); k]);
    let mut feature_time_s = 0.0;
    let mut predict_time_s = 0.0;
    let mut t = Instant::now();
    visit_feature_slabs(v, &m.spec, m.filter_mode, opts.batch_slices, |start, fm| {
        feature_time_s += t.elapsed().as_secs_f64();
        let tp = Instant::now();
        let n = fm.n_samples();
        let p = m.classifier.predict_proba_rows(fm.data())?;
        for (r, row) in p.chunks_exact(k_model).enumerate() {
            labels[start + r] = argmax(row);
        }
        if let Some(vols) = probs.as_mut() {
            for (c, vol) in vols.iter_mut().enumerate().take(k_model) {
                for r in 0..n {
                    vol.data[start + r] = p[r * k_model + c];
                }
            }
        }
        predict_time_s += tp.elapsed().as_secs_f64();
        t = Instant::now();
        Ok(())
    })?;
    Ok(Segmentation {
        labels: LabelVolume::new(dims, labels)?,
        probabilities: probs,
        feature_time_s,
        predict_time_s,
        workers: rayon::current_num_threads(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFraction {
    pub id: ClassId,
    pub name: String,
    pub voxels: usize,
    pub fraction: f64,
}

/// Share of all voxels taken by each catalog class.
pub fn class_fractions(lv: &LabelVolume, catalog: &ClassCatalog) -> Vec<ClassFraction> {
    let mut counts = vec![0usize; 256];
    for &l in lv.labels() {
        counts[usize::from(l)] += 1;
    }
    let n = lv.labels().len() as f64;
    catalog
        .entries()
        .iter()
        .map(|e| ClassFraction {
            id: e.id,
            name: e.name.clone(),
            voxels: counts[usize::from(e.id)],
            fraction: counts[usize::from(e.id)] as f64 / n,
        })
        .collect()
}

pub fn save_fractions_csv(fractions: &[ClassFraction], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for f in fractions {
        w.serialize(f).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

/// Writes each class's probabilities as 8-bit slices (`round(255 p)`) under
/// `dir/prob_<id>/slice_NNNN.pgm`.
pub fn save_probability_stacks(probs: &[RealVolume], dir: &Path) -> Result<()> {
    for (c, vol) in probs.iter().enumerate() {
        let sub = dir.join(format!("prob_{}", c + 1));
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let d = vol.dims;
        for z in 0..d.nz {
            let s = &vol.data[z * d.slice_len()..(z + 1) * d.slice_len()];
            let bytes: Vec<u8> = s.iter().map(|&p| quantize_probability(p)).collect();
            write_pgm(&sub.join(format!("slice_{z:04}.pgm")), d.nx, d.ny, &bytes)?;
        }
    }
    Ok(())
}

pub fn quantize_probability(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Runs `f` on a dedicated pool of `workers` threads (0 means all cores).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build a pool of {workers} workers: {e}")))?;
    Ok(pool.install(f))
}
