//! The staged elimination protocol: tabular, digit images and volumes.

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::env::environment_note;
use super::metrics::compute_accuracy;
use super::report::BenchRecord;
use crate::classifiers::{Algorithm, AlgorithmConfig, TrainedClassifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{visit_feature_slabs, FeatureSpec, FilterMode};
use crate::io::{load_csv_dataset, load_idx, load_label_stack, load_volume};
use crate::pipeline::{labeled_feature_rows, with_workers};
use crate::synth::{generate_phantom, generate_table1_dataset, sparse_mask, PhantomConfig, SynthTabularConfig};
use crate::volume::{ClassCatalog, ClassId, GrayVolume, LabelVolume};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SynthTabularConfig),
    Csv { path: PathBuf, label_column: String },
    Mnist { images: PathBuf, labels: PathBuf },
    /// Train on a sparse mask of one phantom, evaluate on its sibling (`seed + 1`).
    Phantom { config: PhantomConfig, mask_fraction: f64 },
    /// Train on a sparse mask of the labels, evaluate on the other labeled voxels.
    Volume {
        volume: PathBuf,
        labels: PathBuf,
        catalog: Option<PathBuf>,
        mask_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    pub stage: u8,
    pub source: DataSource,
    pub roster: Vec<AlgorithmConfig>,
    /// Training share of the tabular split.
    pub train_fraction: f64,
    /// Timed repeats after the discarded warm-up.
    pub repeats: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub features: FeatureSpec,
    pub filter_mode: FilterMode,
    pub keep_predictions: bool,
}

pub fn default_roster(stage: u8) -> Vec<Algorithm> {
    use Algorithm::*;
    match stage {
        1 => vec![LogisticRegression, NaiveBayes, Svm, Knn, RandomForest],
        2 => vec![Dnn, Mlp, RandomForest, Knn],
        _ => vec![NaiveBayes, Mlp, Dnn, RandomForest],
    }
}

fn unsupported_stage(stage: u8) -> Error {
    if stage == 3 {
        Error::Unsupported(
            "stage 3 (colour images with convolutional networks) is not implemented; \
             only dense models are available"
                .into(),
        )
    } else {
        Error::Config(format!("unknown stage {stage}; expected 1, 2 or 4"))
    }
}

impl StagePlan {
    pub fn default_for(stage: u8) -> Result<Self> {
        let source = match stage {
            1 => DataSource::Synthetic(SynthTabularConfig::default()),
            2 => DataSource::Mnist {
                images: "data/mnist/images-idx3-ubyte".into(),
                labels: "data/mnist/labels-idx1-ubyte".into(),
            },
            4 => DataSource::Phantom {
                config: PhantomConfig::default(),
                mask_fraction: 0.01,
            },
            other => return Err(unsupported_stage(other)),
        };
        Ok(StagePlan {
            stage,
            source,
            roster: default_roster(stage).into_iter().map(AlgorithmConfig::default_for).collect(),
            train_fraction: 0.8,
            repeats: 3,
            seed: 42,
            workers: 0,
            features: FeatureSpec::default_bank(),
            filter_mode: FilterMode::Volumetric,
            keep_predictions: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.roster.is_empty() {
            return Err(Error::Config("algorithm roster is empty".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if let DataSource::Phantom { mask_fraction, .. } | DataSource::Volume { mask_fraction, .. } = self.source {
            if !(mask_fraction > 0.0 && mask_fraction <= 1.0) {
                return Err(Error::Config(format!("mask fraction must lie in (0, 1], got {mask_fraction}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub records: Vec<BenchRecord>,
    /// Shared feature extraction time (volume stage only).
    pub feature_time_s: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageOutcome {
    Completed(StageReport),
    Skipped { reason: String },
}

/// Runs the plan's stage on a pool of `plan.workers` threads.
pub fn run_stage(plan: &StagePlan) -> Result<StageOutcome> {
    plan.validate()?;
    with_workers(plan.workers, || match plan.stage {
        1 => run_stage1(plan).map(|records| {
            StageOutcome::Completed(StageReport {
                records,
                feature_time_s: None,
                notes: Vec::new(),
            })
        }),
        2 => run_stage2_mnist(plan),
        4 => run_stage4(plan).map(StageOutcome::Completed),
        other => Err(unsupported_stage(other)),
    })?
}

struct Measured {
    accuracy: f64,
    train_time_s: f64,
    predict_time_s: f64,
    predictions: Vec<ClassId>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One discarded warm-up, then the median train and predict times of
/// `repeats` runs. Accuracy must agree across runs.
fn measure(
    config: &AlgorithmConfig,
    train: &Dataset,
    eval: &[f64],
    truth: &[ClassId],
    repeats: usize,
    seed: u64,
) -> Result<Measured> {
    let name = config.algorithm().name();
    let run = || -> Result<(f64, f64, Vec<ClassId>)> {
        let t = Instant::now();
        let model = TrainedClassifier::fit(train, config, seed)?;
        let fit = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let pred = model.predict_rows(eval).map_err(|e| e.tagged(name))?;
        Ok((fit, t.elapsed().as_secs_f64(), pred))
    };
    let (_, _, warm) = run()?;
    let (mut fits, mut preds) = (Vec::new(), Vec::new());
    for _ in 0..repeats {
        let (f, p, pred) = run()?;
        if pred != warm {
            return Err(Error::InvalidParameter("predictions differ between repeats".into()).tagged(name));
        }
        fits.push(f);
        preds.push(p);
    }
    Ok(Measured {
        accuracy: compute_accuracy(&warm, truth)?,
        train_time_s: median(fits),
        predict_time_s: median(preds),
        predictions: warm,
    })
}

fn evaluate_roster(plan: &StagePlan, train: &Dataset, eval: &[f64], truth: &[ClassId]) -> Result<Vec<BenchRecord>> {
    let env = environment_note();
    plan.roster
        .iter()
        .map(|cfg| {
            let m = measure(cfg, train, eval, truth, plan.repeats, plan.seed)?;
            Ok(BenchRecord {
                stage: plan.stage,
                algorithm: cfg.algorithm().name().to_string(),
                accuracy: m.accuracy,
                train_time_s: m.train_time_s,
                predict_time_s: m.predict_time_s,
                n_train: train.n_rows(),
                n_eval: truth.len(),
                workers: rayon::current_num_threads(),
                seed: plan.seed,
                env: env.clone(),
                hyperparameters: cfg.summary(),
                predictions: plan.keep_predictions.then_some(m.predictions),
            })
        })
        .collect()
}

/// Tabular stage: stratified split, then every roster algorithm.
pub fn run_stage1(plan: &StagePlan) -> Result<Vec<BenchRecord>> {
    plan.validate()?;
    let data = match &plan.source {
        DataSource::Synthetic(cfg) => generate_table1_dataset(cfg)?,
        DataSource::Csv { path, label_column } => load_csv_dataset(path, Some(label_column), None)?.0,
        other => return Err(Error::Config(format!("stage 1 needs tabular data, got {other:?}"))),
    };
    let (train_idx, test_idx) = data.stratified_split(plan.train_fraction, plan.seed)?;
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    evaluate_roster(plan, &train, test.values(), test.require_labels()?)
}

/// Shuffled 80/10/10 split sizes `floor(0.8 n)`, `floor(0.1 n)` and the rest.
pub fn mnist_split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 8 / 10;
    let n_val = n / 10;
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    (idx, val, test)
}

/// Digit-image stage; skipped when the IDX files are absent.
pub fn run_stage2_mnist(plan: &StagePlan) -> Result<StageOutcome> {
    plan.validate()?;
    let DataSource::Mnist { images, labels } = &plan.source else {
        return Err(Error::Config("stage 2 needs IDX image and label paths".into()));
    };
    for p in [images, labels] {
        if !p.is_file() {
            return Ok(StageOutcome::Skipped {
                reason: format!("{} not found", p.display()),
            });
        }
    }
    let data = load_idx(images, labels)?;
    let (train, val, test) = mnist_split(data.n_rows(), plan.seed);
    let notes = vec![format!("split train/validation/test = {}/{}/{}", train.len(), val.len(), test.len())];
    let train = data.subset(&train);
    let test = data.subset(&test);
    let records = evaluate_roster(plan, &train, test.values(), test.require_labels()?)?;
    Ok(StageOutcome::Completed(StageReport {
        records,
        feature_time_s: None,
        notes,
    }))
}

fn all_feature_rows(v: &GrayVolume, spec: &FeatureSpec, mode: FilterMode) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(v.dims().len() * spec.len());
    visit_feature_slabs(v, spec, mode, 16, |_, fm| {
        out.extend_from_slice(fm.data());
        Ok(())
    })?;
    Ok(out)
}

/// Volume stage: features are extracted once and timed on their own.
pub fn run_stage4(plan: &StagePlan) -> Result<StageReport> {
    plan.validate()?;
    let nf = plan.features.len();
    let t = Instant::now();
    let (train, eval, truth, notes) = match &plan.source {
        DataSource::Phantom { config, mask_fraction } => {
            let (g, l, _) = generate_phantom(config)?;
            let sibling = PhantomConfig {
                seed: config.seed.wrapping_add(1),
                ..config.clone()
            };
            let (g2, l2, _) = generate_phantom(&sibling)?;
            let gen = t.elapsed().as_secs_f64();
            let mask = sparse_mask(&l, *mask_fraction, plan.seed)?;
            let t = Instant::now();
            let train = labeled_feature_rows(&g, &mask, &plan.features, plan.filter_mode, 16)?;
            let eval = all_feature_rows(&g2, &plan.features, plan.filter_mode)?;
            let note = format!(
                "phantom {} seeds {}/{}; generation {gen:.2}s",
                config.dims,
                config.seed,
                sibling.seed
            );
            (train, eval, l2.labels().to_vec(), (vec![note], t.elapsed().as_secs_f64()))
        }
        DataSource::Volume {
            volume,
            labels,
            catalog,
            mask_fraction,
        } => {
            let v = load_volume(volume)?;
            let cat = match catalog {
                Some(p) => crate::io::load_catalog(p)?,
                None => crate::io::load_catalog(&labels.join("catalog.json")).unwrap_or_else(|_| ClassCatalog::rock()),
            };
            let lv = load_label_stack(labels, &cat)?;
            let mask = sparse_mask(&lv, *mask_fraction, plan.seed)?;
            let held_out: Vec<ClassId> = lv
                .labels()
                .iter()
                .zip(mask.labels())
                .map(|(&l, &m)| if m == 0 { l } else { 0 })
                .collect();
            let held_out = LabelVolume::new(lv.dims(), held_out)?;
            let t = Instant::now();
            let train = labeled_feature_rows(&v, &mask, &plan.features, plan.filter_mode, 16)?;
            let eval = labeled_feature_rows(&v, &held_out, &plan.features, plan.filter_mode, 16)?;
            let truth = eval.require_labels()?.to_vec();
            (train, eval.values().to_vec(), truth, (Vec::new(), t.elapsed().as_secs_f64()))
        }
        other => return Err(Error::Config(format!("stage 4 needs volume data, got {other:?}"))),
    };
    let (mut notes, feature_time_s) = notes;
    if truth.is_empty() {
        return Err(Error::Empty("no held-out voxels to evaluate".into()));
    }
    debug_assert_eq!(eval.len(), truth.len() * nf);
    notes.push(format!("shared feature extraction {feature_time_s:.3}s"));
    let records = evaluate_roster(plan, &train, &eval, &truth)?;
    Ok(StageReport {
        records,
        feature_time_s: Some(feature_time_s),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    #[test]
    fn split_sizes() {
        let (a, b, c) = mnist_split(70_000, 1);
        assert_eq!((a.len(), b.len(), c.len()), (56_000, 7_000, 7_000));
        let mut all: Vec<usize> = a.into_iter().chain(b).chain(c).collect();
        all.sort_unstable();
        assert_eq!(all, (0..70_000).collect::<Vec<_>>());
    }

    #[test]
    fn stage3_is_unsupported() {
        assert!(matches!(StagePlan::default_for(3), Err(Error::Unsupported(_))));
        let mut plan = StagePlan::default_for(1).unwrap();
        plan.stage = 3;
        assert!(matches!(run_stage(&plan), Err(Error::Unsupported(_))));
    }

    #[test]
    fn missing_idx_files_skip() {
        let mut plan = StagePlan::default_for(2).unwrap();
        plan.source = DataSource::Mnist {
            images: "/nonexistent/images".into(),
            labels: "/nonexistent/labels".into(),
        };
        assert!(matches!(run_stage(&plan).unwrap(), StageOutcome::Skipped { .. }));
    }

    #[test]
    fn small_stage1_records_every_algorithm() {
        let mut plan = StagePlan::default_for(1).unwrap();
        plan.source = DataSource::Synthetic(SynthTabularConfig { n_rows: 400, ..Default::default() });
        plan.repeats = 1;
        plan.keep_predictions = true;
        let recs = run_stage1(&plan).unwrap();
        assert_eq!(recs.len(), 5);
        for r in &recs {
            assert_eq!(r.n_train + r.n_eval, 400);
            assert!(r.train_time_s >= 0.0 && r.predict_time_s >= 0.0);
            assert!((0.0..=1.0).contains(&r.accuracy));
            assert!(!r.env.is_empty());
            assert_eq!(r.predictions.as_ref().unwrap().len(), r.n_eval);
        }
    }

    #[test]
    fn small_stage4_on_a_phantom() {
        let mut plan = StagePlan::default_for(4).unwrap();
        plan.source = DataSource::Phantom {
            config: PhantomConfig {
                dims: Dims::new(32, 32, 16).unwrap(),
                grain_radius: (3.0, 6.0),
                ..Default::default()
            },
            mask_fraction: 0.05,
        };
        plan.roster = vec![AlgorithmConfig::default_for(Algorithm::NaiveBayes)];
        plan.repeats = 1;
        let report = run_stage4(&plan).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.records[0].n_eval, 32 * 32 * 16);
        assert!(report.feature_time_s.unwrap() > 0.0);
    }

    #[test]
    fn invalid_plans() {
        let mut plan = StagePlan::default_for(1).unwrap();
        plan.roster.clear();
        assert!(matches!(run_stage(&plan), Err(Error::Config(_))));
        let mut plan = StagePlan::default_for(1).unwrap();
        plan.repeats = 0;
        assert!(run_stage(&plan).is_err());
    }
}
