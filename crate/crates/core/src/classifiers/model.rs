//! Uniform train/predict front over every algorithm, plus versioned JSON.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bayes::NaiveBayesModel;
use super::forest::{argmax, ForestParams, RandomForestModel};
use super::knn::{KnnModel, KnnParams};
use super::linear::{logistic_fit, svm_fit, LinearModel, LogisticParams, SvmParams};
use super::net::{DenseNetModel, NetParams, NetScratch};
use super::standardize::Standardizer;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::volume::ClassId;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "RF")]
    RandomForest,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "NB")]
    NaiveBayes,
    #[serde(rename = "LoR")]
    LogisticRegression,
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "MLP")]
    Mlp,
    #[serde(rename = "DNN")]
    Dnn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::RandomForest,
        Algorithm::Knn,
        Algorithm::NaiveBayes,
        Algorithm::LogisticRegression,
        Algorithm::Svm,
        Algorithm::Mlp,
        Algorithm::Dnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RandomForest => "RF",
            Algorithm::Knn => "KNN",
            Algorithm::NaiveBayes => "NB",
            Algorithm::LogisticRegression => "LoR",
            Algorithm::Svm => "SVM",
            Algorithm::Mlp => "MLP",
            Algorithm::Dnn => "DNN",
        }
    }

    /// Key prefix used in config files, e.g. `rf` for `rf.n_trees`.
    pub fn key(self) -> &'static str {
        match self {
            Algorithm::RandomForest => "rf",
            Algorithm::Knn => "knn",
            Algorithm::NaiveBayes => "nb",
            Algorithm::LogisticRegression => "lor",
            Algorithm::Svm => "svm",
            Algorithm::Mlp => "mlp",
            Algorithm::Dnn => "dnn",
        }
    }

    /// Whether inputs are standardized before reaching the model.
    pub fn standardizes(self) -> bool {
        !matches!(self, Algorithm::RandomForest | Algorithm::NaiveBayes)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let alg = match lower.as_str() {
            "rf" | "forest" | "random_forest" => Algorithm::RandomForest,
            "knn" => Algorithm::Knn,
            "nb" | "bayes" | "naive_bayes" => Algorithm::NaiveBayes,
            "lor" | "logreg" | "logistic" => Algorithm::LogisticRegression,
            "svm" => Algorithm::Svm,
            "mlp" => Algorithm::Mlp,
            "dnn" => Algorithm::Dnn,
            _ => return Err(Error::Config(format!("unknown algorithm {s:?}"))),
        };
        Ok(alg)
    }
}

/// An algorithm together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "params")]
pub enum AlgorithmConfig {
    #[serde(rename = "RF")]
    RandomForest(ForestParams),
    #[serde(rename = "KNN")]
    Knn(KnnParams),
    #[serde(rename = "NB")]
    NaiveBayes,
    #[serde(rename = "LoR")]
    LogisticRegression(LogisticParams),
    #[serde(rename = "SVM")]
    Svm(SvmParams),
    #[serde(rename = "MLP")]
    Mlp(NetParams),
    #[serde(rename = "DNN")]
    Dnn(NetParams),
}

impl AlgorithmConfig {
    pub fn default_for(alg: Algorithm) -> Self {
        match alg {
            Algorithm::RandomForest => AlgorithmConfig::RandomForest(ForestParams::default()),
            Algorithm::Knn => AlgorithmConfig::Knn(KnnParams::default()),
            Algorithm::NaiveBayes => AlgorithmConfig::NaiveBayes,
            Algorithm::LogisticRegression => AlgorithmConfig::LogisticRegression(LogisticParams::default()),
            Algorithm::Svm => AlgorithmConfig::Svm(SvmParams::default()),
            Algorithm::Mlp => AlgorithmConfig::Mlp(NetParams::mlp()),
            Algorithm::Dnn => AlgorithmConfig::Dnn(NetParams::dnn()),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            AlgorithmConfig::RandomForest(_) => Algorithm::RandomForest,
            AlgorithmConfig::Knn(_) => Algorithm::Knn,
            AlgorithmConfig::NaiveBayes => Algorithm::NaiveBayes,
            AlgorithmConfig::LogisticRegression(_) => Algorithm::LogisticRegression,
            AlgorithmConfig::Svm(_) => Algorithm::Svm,
            AlgorithmConfig::Mlp(_) => Algorithm::Mlp,
            AlgorithmConfig::Dnn(_) => Algorithm::Dnn,
        }
    }

    /// Compact `key=value` rendering of the hyperparameters.
    pub fn summary(&self) -> String {
        match self {
            AlgorithmConfig::RandomForest(p) => format!(
                "n_trees={} max_depth={} min_samples_split={} features_per_split={} bootstrap={}",
                p.n_trees,
                p.max_depth.map_or("none".into(), |d| d.to_string()),
                p.min_samples_split,
                p.features_per_split.map_or("sqrt".into(), |m| m.to_string()),
                p.bootstrap.map_or("off".into(), |b| b.to_string()),
            ),
            AlgorithmConfig::Knn(p) => format!("k={}", p.k),
            AlgorithmConfig::NaiveBayes => "var_floor=1e-9".into(),
            AlgorithmConfig::LogisticRegression(p) => {
                format!("epochs={} lr={} batch={}", p.epochs, p.learning_rate, p.batch_size)
            }
            AlgorithmConfig::Svm(p) => format!(
                "epochs={} lr={} C={} batch={}",
                p.epochs, p.learning_rate, p.c, p.batch_size
            ),
            AlgorithmConfig::Mlp(p) | AlgorithmConfig::Dnn(p) => format!(
                "hidden={} epochs={} lr={} batch={}",
                p.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join("x"),
                p.epochs,
                p.learning_rate,
                p.batch_size
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum Model {
    Forest(RandomForestModel),
    Knn(KnnModel),
    NaiveBayes(NaiveBayesModel),
    Linear(LinearModel),
    Net(DenseNetModel),
}

/// Reusable per-thread buffers for prediction.
#[derive(Debug, Clone, Default)]
pub struct PredictScratch {
    row: Vec<f64>,
    net: NetScratch,
}

/// A fitted model with its input standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub config: AlgorithmConfig,
    pub seed: u64,
    pub n_features: usize,
    pub n_classes: usize,
    pub standardizer: Option<Standardizer>,
    pub model: Model,
}

#[derive(Serialize, Deserialize)]
struct ClassifierDocument {
    version: u32,
    classifier: TrainedClassifier,
}

const PREDICT_CHUNK: usize = 4096;

impl TrainedClassifier {
    /// Fits `config` on `data`; errors are tagged with the algorithm name.
    pub fn fit(data: &Dataset, config: &AlgorithmConfig, seed: u64) -> Result<Self> {
        let alg = config.algorithm();
        Self::fit_inner(data, config, seed).map_err(|e| e.tagged(alg.name()))
    }

    fn fit_inner(data: &Dataset, config: &AlgorithmConfig, seed: u64) -> Result<Self> {
        data.require_labels()?;
        if data.is_empty() {
            return Err(Error::Empty("training set has no rows".into()));
        }
        let (standardizer, scaled) = if config.algorithm().standardizes() {
            let s = Standardizer::fit(data)?;
            let scaled = s.apply(data)?;
            (Some(s), Some(scaled))
        } else {
            (None, None)
        };
        let train = scaled.as_ref().unwrap_or(data);
        let model = match config {
            AlgorithmConfig::RandomForest(p) => Model::Forest(RandomForestModel::fit(train, p, seed)?),
            AlgorithmConfig::Knn(p) => Model::Knn(KnnModel::fit(train, p)?),
            AlgorithmConfig::NaiveBayes => Model::NaiveBayes(NaiveBayesModel::fit(train)?),
            AlgorithmConfig::LogisticRegression(p) => Model::Linear(logistic_fit(train, p, seed)?),
            AlgorithmConfig::Svm(p) => Model::Linear(svm_fit(train, p, seed)?),
            AlgorithmConfig::Mlp(p) | AlgorithmConfig::Dnn(p) => {
                Model::Net(DenseNetModel::fit(train, p, seed)?)
            }
        };
        Ok(TrainedClassifier {
            config: config.clone(),
            seed,
            n_features: data.n_features(),
            n_classes: data.n_classes(),
            standardizer,
            model,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm()
    }

    /// Class distribution for one raw (unstandardized) row.
    pub fn predict_proba_into(&self, row: &[f64], scratch: &mut PredictScratch, out: &mut [f64]) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: row.len(),
            });
        }
        let x = match &self.standardizer {
            Some(s) => {
                scratch.row.resize(row.len(), 0.0);
                s.apply_row(row, &mut scratch.row);
                &scratch.row[..]
            }
            None => row,
        };
        let k = self.n_classes;
        match &self.model {
            Model::Forest(m) => m.predict_proba_into(x, out)?,
            Model::Net(m) => m.predict_proba_into(x, &mut scratch.net, out)?,
            Model::Knn(m) => out[..k].copy_from_slice(&m.predict_proba(x)?),
            Model::NaiveBayes(m) => out[..k].copy_from_slice(&m.predict_proba(x)?),
            Model::Linear(m) => out[..k].copy_from_slice(&m.predict_proba(x)?),
        }
        Ok(())
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_classes];
        self.predict_proba_into(row, &mut PredictScratch::default(), &mut out)?;
        Ok(out)
    }

    /// Predicted class for one raw row. Ties go to the lowest id.
    pub fn predict(&self, row: &[f64]) -> Result<ClassId> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: row.len(),
            });
        }
        let mut x = row.to_vec();
        if let Some(s) = &self.standardizer {
            s.apply_row(row, &mut x);
        }
        match &self.model {
            Model::Forest(m) => m.predict(&x),
            Model::Knn(m) => m.predict(&x),
            Model::NaiveBayes(m) => m.predict(&x),
            Model::Linear(m) => m.predict(&x),
            Model::Net(m) => m.predict(&x),
        }
    }

    /// Class distributions for row-major `values`, `n_classes` per row.
    /// Rows are processed in parallel; the result does not depend on the
    /// number of worker threads.
    pub fn predict_proba_rows(&self, values: &[f64]) -> Result<Vec<f64>> {
        let nf = self.n_features.max(1);
        if values.len() % nf != 0 {
            return Err(Error::SizeMismatch(format!(
                "{} values is not a multiple of {} features",
                values.len(),
                nf
            )));
        }
        let k = self.n_classes;
        let mut out = vec![0.0; values.len() / nf * k];
        out.par_chunks_mut(PREDICT_CHUNK * k)
            .zip(values.par_chunks(PREDICT_CHUNK * nf))
            .try_for_each(|(o, v)| {
                if let (Model::Forest(m), None) = (&self.model, &self.standardizer) {
                    return m.predict_proba_rows(v, o);
                }
                let mut scratch = PredictScratch::default();
                for (orow, row) in o.chunks_exact_mut(k).zip(v.chunks_exact(nf)) {
                    self.predict_proba_into(row, &mut scratch, orow)?;
                }
                Ok::<_, Error>(())
            })?;
        Ok(out)
    }

    /// Predicted classes for row-major `values`.
    pub fn predict_rows(&self, values: &[f64]) -> Result<Vec<ClassId>> {
        if matches!(self.model, Model::NaiveBayes(_) | Model::Linear(_) | Model::Knn(_)) {
            let nf = self.n_features.max(1);
            if values.len() % nf != 0 {
                return Err(Error::SizeMismatch(format!(
                    "{} values is not a multiple of {} features",
                    values.len(),
                    nf
                )));
            }
            return values.par_chunks(nf).map(|r| self.predict(r)).collect();
        }
        let p = self.predict_proba_rows(values)?;
        Ok(p.chunks_exact(self.n_classes).map(argmax).collect())
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<ClassId>> {
        if data.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: data.n_features(),
            });
        }
        self.predict_rows(data.values())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&ClassifierDocument {
            version: MODEL_FORMAT_VERSION,
            classifier: self.clone(),
        })
        .map_err(|e| Error::InvalidParameter(format!("cannot serialize model: {e}")))
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let version = read_version(text, origin)?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::format(origin, format!("unsupported model version {version}")));
        }
        let doc: ClassifierDocument = parse_json(text, origin)?;
        Ok(doc.classifier)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

/// Parses JSON without the default nesting limit, since trees can be deep.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    T::deserialize(&mut de).map_err(|e| Error::format(origin, e.to_string()))
}

/// Reads the top-level `version` field.
pub(crate) fn read_version(text: &str, origin: &Path) -> Result<u32> {
    #[derive(Deserialize)]
    struct Header {
        version: u32,
    }
    parse_json::<Header>(text, origin).map(|h| h.version)
}
