//! Four-column tabular data in the style of the petrophysicist sample table.
//!
//! Columns: `PhiXsectContin` and `Betw2Amplify` are binary indicators,
//! `PixelColor` is a gray level in [0, 255] and `NeighbColorGrad` a local
//! gradient in [0, 127]. Labels come from [`label_function`]:
//!
//! 1. Solid: `PixelColor >= 180`, or `NeighbColorGrad >= 40`,
//!    `PixelColor >= 130`, `Betw2Amplify = 0` and `PhiXsectContin = 1`.
//! 2. throat: `PhiXsectContin = 1`, `Betw2Amplify = 1`, `PixelColor < 130`.
//! 3. NC_Vugs: `PhiXsectContin = 0` and `100 <= PixelColor < 180`.
//! 4. Pore: `PixelColor < 130`, `NeighbColorGrad >= 60`, `Betw2Amplify = 0`.
//! 5. Anything else goes to the nearest class centroid.
//!
//! The first rule that matches wins.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::volume::{ClassCatalog, ClassId};

pub const TABLE1_COLUMNS: [&str; 4] = ["PhiXsectContin", "PixelColor", "NeighbColorGrad", "Betw2Amplify"];
pub const TABLE1_LABEL_COLUMN: &str = "Lable";
pub const TABLE1_CLASSES: [&str; 4] = ["Pore", "throat", "Solid", "NC_Vugs"];

pub const PORE: ClassId = 1;
pub const THROAT: ClassId = 2;
pub const SOLID: ClassId = 3;
pub const NC_VUGS: ClassId = 4;

const PIXEL_MAX: f64 = 255.0;
const GRAD_MAX: f64 = 127.0;

/// Centroids of the rule regions, in column order.
const CENTROIDS: [[f64; 4]; 4] = [
    [0.5, 65.0, 93.5, 0.0],
    [1.0, 65.0, 63.5, 1.0],
    [0.5, 217.5, 63.5, 0.5],
    [0.0, 140.0, 63.5, 0.5],
];

/// Catalog of the four tabular classes.
pub fn table1_catalog() -> ClassCatalog {
    ClassCatalog::from_names(&TABLE1_CLASSES).expect("distinct names")
}

fn rule(phi: bool, pc: f64, grad: f64, amp: bool) -> Option<ClassId> {
    if pc >= 180.0 || (grad >= 40.0 && pc >= 130.0 && !amp && phi) {
        Some(SOLID)
    } else if phi && amp && pc < 130.0 {
        Some(THROAT)
    } else if !phi && (100.0..180.0).contains(&pc) {
        Some(NC_VUGS)
    } else if pc < 130.0 && grad >= 60.0 && !amp {
        Some(PORE)
    } else {
        None
    }
}

fn nearest_centroid(f: &[f64; 4]) -> ClassId {
    let scale = [1.0, PIXEL_MAX, GRAD_MAX, 1.0];
    let mut best = (f64::INFINITY, 0);
    for (c, centroid) in CENTROIDS.iter().enumerate() {
        let d: f64 = (0..4).map(|j| ((f[j] - centroid[j]) / scale[j]).powi(2)).sum();
        if d < best.0 {
            best = (d, c);
        }
    }
    (best.1 + 1) as ClassId
}

/// Expert rule mapping `(PhiXsectContin, PixelColor, NeighbColorGrad,
/// Betw2Amplify)` to a class id of [`table1_catalog`].
pub fn label_function(features: &[f64]) -> Result<ClassId> {
    let [phi, pc, grad, amp]: [f64; 4] = features.try_into().map_err(|_| Error::DimensionMismatch {
        expected: 4,
        actual: features.len(),
    })?;
    let binary = |v: f64| v == 0.0 || v == 1.0;
    if !binary(phi) || !binary(amp) || !(0.0..=PIXEL_MAX).contains(&pc) || !(0.0..=GRAD_MAX).contains(&grad) {
        return Err(Error::InvalidParameter(format!(
            "features out of range: {features:?}"
        )));
    }
    Ok(rule(phi == 1.0, pc, grad, amp == 1.0).unwrap_or_else(|| nearest_centroid(&[phi, pc, grad, amp])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTabularConfig {
    pub n_rows: usize,
    /// Proportions of Pore, throat, Solid, NC_Vugs.
    pub class_mix: [f64; 4],
    /// Gaussian noise on the two gray-level columns, in gray levels.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthTabularConfig {
    fn default() -> Self {
        SynthTabularConfig {
            n_rows: 10_000,
            class_mix: [0.25; 4],
            noise_std: 4.0,
            seed: 42,
        }
    }
}

impl SynthTabularConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 {
            return Err(Error::Config("synthetic table needs n_rows >= 1".into()));
        }
        if self.class_mix.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Config(format!("class mix must be nonnegative: {:?}", self.class_mix)));
        }
        let total: f64 = self.class_mix.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("class mix sums to {total}, not 1")));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise std must be >= 0, got {}", self.noise_std)));
        }
        Ok(())
    }
}

/// Draws a clean row of class `class` whose gray-level columns sit at least
/// `margin` inside the rule region.
fn draw_row(class: ClassId, margin: f64, rng: &mut ChaCha8Rng) -> [f64; 4] {
    let holds = |f: &[f64; 4]| label_function(f).ok() == Some(class);
    loop {
        let f = [
            f64::from(rng.random_range(0..=1u8)),
            f64::from(rng.random_range(0..=255u8)),
            f64::from(rng.random_range(0..=127u8)),
            f64::from(rng.random_range(0..=1u8)),
        ];
        if !holds(&f) {
            continue;
        }
        let shifted = |j: usize, d: f64, hi: f64| {
            let mut g = f;
            g[j] = (g[j] + d).clamp(0.0, hi);
            g
        };
        if margin == 0.0
            || [
                shifted(1, margin, PIXEL_MAX),
                shifted(1, -margin, PIXEL_MAX),
                shifted(2, margin, GRAD_MAX),
                shifted(2, -margin, GRAD_MAX),
            ]
            .iter()
            .all(holds)
        {
            return f;
        }
    }
}

/// Generates a labelled table; row classes are drawn from the mix, features
/// from the class's rule region, then gray-level noise is added, clipped and
/// rounded to whole levels.
pub fn generate_table1_dataset(cfg: &SynthTabularConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mix = WeightedIndex::new(cfg.class_mix).map_err(|e| Error::Config(format!("class mix: {e}")))?;
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Config(format!("noise: {e}")))?;
    let margin = 3.0 * cfg.noise_std;
    let mut values = Vec::with_capacity(cfg.n_rows * 4);
    let mut labels = Vec::with_capacity(cfg.n_rows);
    for _ in 0..cfg.n_rows {
        let class = (mix.sample(&mut rng) + 1) as ClassId;
        let mut f = draw_row(class, margin, &mut rng);
        if cfg.noise_std > 0.0 {
            f[1] = (f[1] + noise.sample(&mut rng)).clamp(0.0, PIXEL_MAX).round();
            f[2] = (f[2] + noise.sample(&mut rng)).clamp(0.0, GRAD_MAX).round();
        }
        values.extend_from_slice(&f);
        labels.push(class);
    }
    Dataset::new(
        TABLE1_COLUMNS.iter().map(|s| s.to_string()).collect(),
        values,
        Some(labels),
    )
}

/// The six printed sample rows with their labels.
pub fn table1_rows() -> Vec<([f64; 4], ClassId)> {
    vec![
        ([0.0, 251.0, 64.0, 0.0], SOLID),
        ([1.0, 78.0, 19.0, 1.0], THROAT),
        ([0.0, 138.0, 29.0, 0.0], NC_VUGS),
        ([0.0, 133.0, 35.0, 1.0], NC_VUGS),
        ([1.0, 185.0, 45.0, 0.0], SOLID),
        ([1.0, 96.0, 84.0, 0.0], PORE),
    ]
}
