//! Rock-like 3-D phantoms with dense ground truth.
//!
//! Spherical grains are placed by random sequential addition without
//! overlap. The intergranular pore is the `porosity * N` voxels farthest
//! from any grain surface; the rest of the space between grains becomes
//! cement overgrowth. Grains are cement with an optional concentric
//! bioclast core, small spherical vugs joined by thin cylindrical throats,
//! and pyrite speckles are sprinkled through the cement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{ClassCatalog, ClassId, Dims, GrayVolume, LabelVolume};

pub const BIOCLAST: ClassId = 1;
pub const CEMENT: ClassId = 2;
pub const VUGS: ClassId = 3;
pub const PYRITE: ClassId = 4;
pub const PORE: ClassId = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intensity {
    pub mean: f64,
    pub std: f64,
}

/// Gray-level distribution per class of [`ClassCatalog::rock`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityMap {
    pub bioclast: Intensity,
    pub cement: Intensity,
    pub vugs: Intensity,
    pub pyrite: Intensity,
    pub pore: Intensity,
}

impl Default for IntensityMap {
    fn default() -> Self {
        let i = |mean, std| Intensity { mean, std };
        IntensityMap {
            bioclast: i(120.0, 10.0),
            cement: i(150.0, 10.0),
            vugs: i(30.0, 8.0),
            pyrite: i(245.0, 5.0),
            pore: i(30.0, 8.0),
        }
    }
}

impl IntensityMap {
    pub fn get(&self, class: ClassId) -> Intensity {
        match class {
            BIOCLAST => self.bioclast,
            CEMENT => self.cement,
            VUGS => self.vugs,
            PYRITE => self.pyrite,
            _ => self.pore,
        }
    }

    fn all(&self) -> [Intensity; 5] {
        [self.bioclast, self.cement, self.vugs, self.pyrite, self.pore]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomConfig {
    pub dims: Dims,
    /// Intergranular pore fraction of all voxels.
    pub porosity: f64,
    pub grain_radius: (f64, f64),
    /// Expected vugs per grain.
    pub vug_density: f64,
    pub vug_radius: (f64, f64),
    /// Probability that two neighbouring vugs of a grain are joined by a throat.
    pub throat_density: f64,
    pub throat_radius: f64,
    /// Fraction of voxels turned into pyrite.
    pub pyrite_fraction: f64,
    /// Probability that a grain carries a bioclast core.
    pub bioclast_probability: f64,
    /// Core radius relative to its grain.
    pub bioclast_ratio: f64,
    pub intensity: IntensityMap,
    /// Placement attempts per placed grain before packing stops.
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            dims: Dims::new(128, 128, 64).expect("non-zero"),
            porosity: 0.30,
            grain_radius: (5.0, 12.0),
            vug_density: 1.0,
            vug_radius: (1.5, 3.0),
            throat_density: 0.5,
            throat_radius: 1.0,
            pyrite_fraction: 0.005,
            bioclast_probability: 0.35,
            bioclast_ratio: 0.5,
            intensity: IntensityMap::default(),
            max_attempts: 200,
            seed: 7,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("phantom: {m}")));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        for (name, v) in [
            ("porosity", self.porosity),
            ("throat_density", self.throat_density),
            ("pyrite_fraction", self.pyrite_fraction),
            ("bioclast_probability", self.bioclast_probability),
            ("bioclast_ratio", self.bioclast_ratio),
        ] {
            if !unit(v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, (lo, hi)) in [("grain_radius", self.grain_radius), ("vug_radius", self.vug_radius)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("{name} range must be positive and ordered, got ({lo}, {hi})"));
            }
        }
        if !(self.vug_density >= 0.0 && self.vug_density.is_finite()) {
            return bad(format!("vug_density must be >= 0, got {}", self.vug_density));
        }
        if !(self.throat_radius > 0.0) {
            return bad(format!("throat_radius must be positive, got {}", self.throat_radius));
        }
        for i in self.intensity.all() {
            if !(0.0..=255.0).contains(&i.mean) || !(i.std >= 0.0) {
                return bad(format!("intensity {i:?} out of range"));
            }
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Sphere {
    c: [f64; 3],
    r: f64,
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Voxel index range `[lo, hi)` along one axis covering `[c - r, c + r]`.
fn span(c: f64, r: f64, n: usize) -> std::ops::Range<usize> {
    let lo = (c - r).ceil().max(0.0) as usize;
    let hi = ((c + r).floor() + 1.0).clamp(0.0, n as f64) as usize;
    lo.min(hi)..hi
}

fn for_each_in_ball(dims: Dims, s: Sphere, mut f: impl FnMut(usize, [f64; 3])) {
    let r2 = s.r * s.r;
    for z in span(s.c[2], s.r, dims.nz) {
        for y in span(s.c[1], s.r, dims.ny) {
            for x in span(s.c[0], s.r, dims.nx) {
                let p = [x as f64, y as f64, z as f64];
                if dist2(p, s.c) <= r2 {
                    f(dims.index(x, y, z), p);
                }
            }
        }
    }
}

/// Squared distance from `p` to the segment `a`-`b`.
fn segment_dist2(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab: Vec<f64> = (0..3).map(|i| b[i] - a[i]).collect();
    let ap: Vec<f64> = (0..3).map(|i| p[i] - a[i]).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 > 0.0 {
        (ab.iter().zip(&ap).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (0..3).map(|i| (ap[i] - t * ab[i]).powi(2)).sum()
}

fn place_grains(cfg: &PhantomConfig, rng: &mut ChaCha8Rng) -> Vec<Sphere> {
    let d = cfg.dims;
    let n = d.len() as f64;
    let target = (1.0 - cfg.porosity) * n;
    let (rlo, rhi) = cfg.grain_radius;
    let mut grains: Vec<Sphere> = Vec::new();
    let mut volume = 0.0;
    let mut failures = 0;
    while failures < cfg.max_attempts && volume < target {
        let r = if rhi > rlo { rng.random_range(rlo..=rhi) } else { rlo };
        let c = [
            rng.random_range(0.0..d.nx as f64),
            rng.random_range(0.0..d.ny as f64),
            rng.random_range(0.0..d.nz as f64),
        ];
        if grains.iter().all(|g| dist2(g.c, c) > (g.r + r).powi(2)) {
            grains.push(Sphere { c, r });
            volume += 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
            failures = 0;
        } else {
            failures += 1;
        }
    }
    grains
}

/// Signed distance to the nearest grain surface (negative inside).
fn signed_distance(dims: Dims, grains: &[Sphere]) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; dims.len()];
    for (i, v) in d.iter_mut().enumerate() {
        let (x, y, z) = dims.coords(i);
        let p = [x as f64, y as f64, z as f64];
        for g in grains {
            let s = dist2(p, g.c).sqrt() - g.r;
            if s < *v {
                *v = s;
            }
        }
    }
    d
}

/// Gray volume, dense labels and the five-class rock catalog.
pub fn generate_phantom(cfg: &PhantomConfig) -> Result<(GrayVolume, LabelVolume, ClassCatalog)> {
    cfg.validate()?;
    let dims = cfg.dims;
    let n = dims.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grains = place_grains(cfg, &mut rng);

    let sd = signed_distance(dims, &grains);
    let n_pore = (cfg.porosity * n as f64).round() as usize;
    let outside = sd.iter().filter(|&&v| v > 0.0).count();
    if outside < n_pore {
        return Err(Error::Porosity {
            target: cfg.porosity,
            achieved: outside as f64 / n as f64,
        });
    }
    let mut labels = vec![CEMENT; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| sd[b].total_cmp(&sd[a]).then(a.cmp(&b)));
    for &i in &order[..n_pore] {
        labels[i] = PORE;
    }

    for g in &grains {
        if rng.random_bool(cfg.bioclast_probability) {
            let core = Sphere { c: g.c, r: g.r * cfg.bioclast_ratio };
            for_each_in_ball(dims, core, |i, _| labels[i] = BIOCLAST);
        }
    }

    let (vlo, vhi) = cfg.vug_radius;
    for g in &grains {
        let expected = cfg.vug_density;
        let mut count = expected.floor() as usize;
        if rng.random_bool(expected.fract()) {
            count += 1;
        }
        let mut vugs: Vec<Sphere> = Vec::new();
        for _ in 0..count {
            let r = if vhi > vlo { rng.random_range(vlo..=vhi) } else { vlo };
            let room = g.r - r;
            if room <= 0.0 {
                continue;
            }
            let c = loop {
                let o = [
                    rng.random_range(-room..=room),
                    rng.random_range(-room..=room),
                    rng.random_range(-room..=room),
                ];
                if dist2(o, [0.0; 3]) <= room * room {
                    break [g.c[0] + o[0], g.c[1] + o[1], g.c[2] + o[2]];
                }
            };
            vugs.push(Sphere { c, r });
        }
        for v in &vugs {
            for_each_in_ball(dims, *v, |i, _| labels[i] = VUGS);
        }
        let tr2 = cfg.throat_radius * cfg.throat_radius;
        for pair in vugs.windows(2) {
            if !rng.random_bool(cfg.throat_density) {
                continue;
            }
            let (a, b) = (pair[0].c, pair[1].c);
            let bound = Sphere { c: g.c, r: g.r };
            for_each_in_ball(dims, bound, |i, p| {
                if segment_dist2(p, a, b) <= tr2 {
                    labels[i] = VUGS;
                }
            });
        }
    }

    let n_pyrite = (cfg.pyrite_fraction * n as f64).round() as usize;
    let cement_voxels = labels.iter().filter(|&&l| l == CEMENT).count();
    if n_pyrite > cement_voxels {
        return Err(Error::Config(format!(
            "phantom: pyrite fraction {} exceeds available cement",
            cfg.pyrite_fraction
        )));
    }
    let mut placed = 0;
    let mut tries = 0usize;
    while placed < n_pyrite && tries < 100 * n_pyrite + 1000 {
        tries += 1;
        let i = rng.random_range(0..n);
        if labels[i] != CEMENT {
            continue;
        }
        let (x, y, z) = dims.coords(i);
        let blob = Sphere { c: [x as f64, y as f64, z as f64], r: 1.0 };
        for_each_in_ball(dims, blob, |j, _| {
            if labels[j] == CEMENT && placed < n_pyrite {
                labels[j] = PYRITE;
                placed += 1;
            }
        });
    }

    let noise: Vec<Normal<f64>> = cfg
        .intensity
        .all()
        .iter()
        .map(|i| Normal::new(0.0, i.std).expect("validated std"))
        .collect();
    let voxels: Vec<u8> = labels
        .iter()
        .map(|&l| {
            let mean = cfg.intensity.get(l).mean;
            let v = mean + noise[usize::from(l) - 1].sample(&mut rng);
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();

    Ok((
        GrayVolume::new(dims, voxels)?,
        LabelVolume::new(dims, labels)?,
        ClassCatalog::rock(),
    ))
}

/// Keeps each labeled voxel with probability `fraction`, clearing the rest,
/// and makes sure every class present in `lv` keeps at least one voxel.
pub fn sparse_mask(lv: &LabelVolume, fraction: f64, seed: u64) -> Result<LabelVolume> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!("mask fraction {fraction} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = lv.labels();
    let mut out = vec![0; src.len()];
    let mut kept = [false; 256];
    for (o, &l) in out.iter_mut().zip(src) {
        if l != 0 && rng.random_bool(fraction) {
            *o = l;
            kept[usize::from(l)] = true;
        }
    }
    for (i, &l) in src.iter().enumerate() {
        if l != 0 && !kept[usize::from(l)] {
            out[i] = l;
            kept[usize::from(l)] = true;
        }
    }
    LabelVolume::new(lv.dims(), out)
}
