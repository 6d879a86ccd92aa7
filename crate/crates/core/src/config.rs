//! Flat `key=value` configuration with dotted namespaces.
//!
//! ```text
//! # stage 1 with a smaller forest
//! stage = 1
//! roster = RF,KNN,NB
//! rf.n_trees = 50
//! stage1.rows = 5000
//! ```
//!
//! Blank lines and `#` comments are ignored. Keys are consumed as they are
//! read; any key left over is reported as unknown.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bench::{DataSource, EliminationGate, StagePlan};
use crate::classifiers::{Algorithm, AlgorithmConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureSpec, FilterMode};
use crate::synth::{Intensity, PhantomConfig, SynthTabularConfig};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl FromStr for Config {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {raw:?}", n + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            if values.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", n + 1)));
            }
        }
        Ok(Config { values })
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    /// Sets or overrides a key.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Removes and returns the raw value of `key`.
    pub fn take_raw(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    /// Removes and parses `key`.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    fn take_into<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn take_list<T: FromStr>(&mut self, key: &str, sep: char) -> Result<Option<Vec<T>>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(sep)
                .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn take_pair(&mut self, key: &str) -> Result<Option<(f64, f64)>> {
        match self.take_list::<f64>(key, ',')? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some((v[0], v[1]))),
            Some(_) => Err(Error::Config(format!("{key}: expected two comma-separated numbers"))),
        }
    }

    /// Errors if any key was never consumed.
    pub fn finish(self) -> Result<()> {
        if self.values.is_empty() {
            Ok(())
        } else {
            let keys: Vec<&str> = self.values.keys().map(String::as_str).collect();
            Err(Error::Config(format!("unknown key(s): {}", keys.join(", "))))
        }
    }

    /// Tabular generator settings under `stage1.`.
    pub fn synth_tabular(&mut self) -> Result<SynthTabularConfig> {
        let mut c = SynthTabularConfig::default();
        self.take_into("stage1.rows", &mut c.n_rows)?;
        self.take_into("stage1.noise", &mut c.noise_std)?;
        self.take_into("stage1.seed", &mut c.seed)?;
        if let Some(mix) = self.take_list::<f64>("stage1.mix", ',')? {
            c.class_mix = mix
                .try_into()
                .map_err(|_| Error::Config("stage1.mix: expected four proportions".into()))?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Phantom settings under `phantom.`.
    pub fn phantom(&mut self) -> Result<PhantomConfig> {
        let mut c = PhantomConfig::default();
        self.take_into("phantom.dims", &mut c.dims)?;
        self.take_into("phantom.porosity", &mut c.porosity)?;
        self.take_into("phantom.vug_density", &mut c.vug_density)?;
        self.take_into("phantom.throat_density", &mut c.throat_density)?;
        self.take_into("phantom.throat_radius", &mut c.throat_radius)?;
        self.take_into("phantom.pyrite_fraction", &mut c.pyrite_fraction)?;
        self.take_into("phantom.bioclast_probability", &mut c.bioclast_probability)?;
        self.take_into("phantom.bioclast_ratio", &mut c.bioclast_ratio)?;
        self.take_into("phantom.max_attempts", &mut c.max_attempts)?;
        self.take_into("phantom.seed", &mut c.seed)?;
        if let Some(r) = self.take_pair("phantom.grain_radius")? {
            c.grain_radius = r;
        }
        if let Some(r) = self.take_pair("phantom.vug_radius")? {
            c.vug_radius = r;
        }
        let im = &mut c.intensity;
        for (name, slot) in [
            ("bioclast", &mut im.bioclast),
            ("cement", &mut im.cement),
            ("vugs", &mut im.vugs),
            ("pyrite", &mut im.pyrite),
            ("pore", &mut im.pore),
        ] {
            let key = format!("phantom.intensity.{name}");
            if let Some((mean, std)) = self.take_pair(&key)? {
                *slot = Intensity { mean, std };
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Hyperparameters for `alg` under its key prefix (e.g. `rf.`).
    pub fn algorithm(&mut self, alg: Algorithm) -> Result<AlgorithmConfig> {
        let mut cfg = AlgorithmConfig::default_for(alg);
        let p = alg.key();
        let key = |k: &str| format!("{p}.{k}");
        match &mut cfg {
            AlgorithmConfig::RandomForest(f) => {
                self.take_into(&key("n_trees"), &mut f.n_trees)?;
                self.take_into(&key("min_samples_split"), &mut f.min_samples_split)?;
                if let Some(v) = self.take_raw(&key("max_depth")) {
                    f.max_depth = optional(&key("max_depth"), &v, "none")?;
                }
                if let Some(v) = self.take_raw(&key("features_per_split")) {
                    f.features_per_split = optional(&key("features_per_split"), &v, "sqrt")?;
                }
                if let Some(v) = self.take_raw(&key("bootstrap")) {
                    f.bootstrap = optional(&key("bootstrap"), &v, "off")?;
                }
            }
            AlgorithmConfig::Knn(k) => self.take_into(&key("k"), &mut k.k)?,
            AlgorithmConfig::NaiveBayes => {}
            AlgorithmConfig::LogisticRegression(l) => {
                self.take_into(&key("epochs"), &mut l.epochs)?;
                self.take_into(&key("lr"), &mut l.learning_rate)?;
                self.take_into(&key("batch"), &mut l.batch_size)?;
            }
            AlgorithmConfig::Svm(s) => {
                self.take_into(&key("epochs"), &mut s.epochs)?;
                self.take_into(&key("lr"), &mut s.learning_rate)?;
                self.take_into(&key("c"), &mut s.c)?;
                self.take_into(&key("batch"), &mut s.batch_size)?;
            }
            AlgorithmConfig::Mlp(n) | AlgorithmConfig::Dnn(n) => {
                if let Some(h) = self.take_list::<usize>(&key("hidden"), 'x')? {
                    n.hidden = h;
                }
                self.take_into(&key("epochs"), &mut n.epochs)?;
                self.take_into(&key("lr"), &mut n.learning_rate)?;
                self.take_into(&key("batch"), &mut n.batch_size)?;
            }
        }
        Ok(cfg)
    }

    /// Feature bank from `features.spec` (a spec file) and `features.mode`.
    pub fn features(&mut self) -> Result<(FeatureSpec, FilterMode)> {
        let spec = match self.take_raw("features.spec") {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                FeatureSpec::parse(&text)?
            }
            None => FeatureSpec::default_bank(),
        };
        let mode = match self.take_raw("features.mode").as_deref() {
            None | Some("volumetric") | Some("3d") => FilterMode::Volumetric,
            Some("per_slice") | Some("2d") => FilterMode::PerSlice,
            Some(other) => return Err(Error::Config(format!("features.mode: unknown mode {other:?}"))),
        };
        Ok((spec, mode))
    }

    /// Elimination gate from `gate`, defaulting to lowest accuracy.
    pub fn gate(&mut self) -> Result<EliminationGate> {
        match self.take_raw("gate") {
            Some(g) => g.parse(),
            None => Ok(EliminationGate::default()),
        }
    }

    /// Benchmark plan for `stage`. Unknown keys are left for [`finish`](Self::finish).
    pub fn stage_plan(&mut self, stage: u8) -> Result<StagePlan> {
        let mut plan = StagePlan::default_for(stage)?;
        self.take_into("seed", &mut plan.seed)?;
        self.take_into("repeats", &mut plan.repeats)?;
        self.take_into("workers", &mut plan.workers)?;
        self.take_into("train_fraction", &mut plan.train_fraction)?;
        self.take_into("keep_predictions", &mut plan.keep_predictions)?;
        let (spec, mode) = self.features()?;
        plan.features = spec;
        plan.filter_mode = mode;
        let roster: Vec<Algorithm> = match self.take_list::<Algorithm>("roster", ',')? {
            Some(r) => r,
            None => plan.roster.iter().map(AlgorithmConfig::algorithm).collect(),
        };
        plan.roster = Vec::with_capacity(roster.len());
        for alg in &roster {
            plan.roster.push(self.algorithm(*alg)?);
        }
        for alg in Algorithm::ALL.iter().filter(|a| !roster.contains(a)) {
            self.algorithm(*alg)?;
        }
        plan.source = match stage {
            1 => match self.take_raw("stage1.csv") {
                Some(path) => DataSource::Csv {
                    path: path.into(),
                    label_column: self.take_raw("stage1.label_column").unwrap_or_else(|| "Lable".into()),
                },
                None => DataSource::Synthetic(self.synth_tabular()?),
            },
            2 => {
                let mut images = PathBuf::from("data/mnist/images-idx3-ubyte");
                let mut labels = PathBuf::from("data/mnist/labels-idx1-ubyte");
                self.take_into("mnist.images", &mut images)?;
                self.take_into("mnist.labels", &mut labels)?;
                DataSource::Mnist { images, labels }
            }
            _ => {
                let mut mask_fraction = 0.01;
                self.take_into("stage4.mask_fraction", &mut mask_fraction)?;
                match self.take_raw("stage4.volume") {
                    Some(volume) => DataSource::Volume {
                        volume: volume.into(),
                        labels: self
                            .take_raw("stage4.labels")
                            .ok_or_else(|| Error::Config("stage4.volume needs stage4.labels".into()))?
                            .into(),
                        catalog: self.take_raw("stage4.catalog").map(PathBuf::from),
                        mask_fraction,
                    },
                    None => DataSource::Phantom {
                        config: self.phantom()?,
                        mask_fraction,
                    },
                }
            }
        };
        plan.validate()?;
        Ok(plan)
    }
}

fn optional<T: FromStr>(key: &str, v: &str, none: &str) -> Result<Option<T>> {
    if v.eq_ignore_ascii_case(none) {
        return Ok(None);
    }
    v.parse()
        .map(Some)
        .map_err(|_| Error::Config(format!("{key}: expected a number or {none:?}, got {v:?}")))
}
