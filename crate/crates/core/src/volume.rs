//! Voxel grids, label masks and the class catalog.
//!
//! All grids use x-fastest ordering: voxel `(x, y, z)` lives at
//! `x + nx * (y + ny * z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ClassId = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidParameter(format!(
                "volume dimensions must be >= 1, got {nx}x{ny}x{nz}"
            )));
        }
        Ok(Dims { nx, ny, nz })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let x = index % self.nx;
        let y = (index / self.nx) % self.ny;
        let z = index / self.slice_len();
        (x, y, z)
    }

    pub fn with_nz(&self, nz: usize) -> Dims {
        Dims { nz, ..*self }
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

impl std::str::FromStr for Dims {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['x', 'X', ',']).map(str::trim).collect();
        let bad = || Error::Config(format!("expected dimensions like 128x128x64, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut v = [0usize; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| bad())?;
        }
        Dims::new(v[0], v[1], v[2])
    }
}

/// 8-bit gray-scale volume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayVolume {
    dims: Dims,
    voxels: Vec<u8>,
}

impl GrayVolume {
    pub fn new(dims: Dims, voxels: Vec<u8>) -> Result<Self> {
        if voxels.len() != dims.len() {
            return Err(Error::SizeMismatch(format!(
                "{} voxels for dimensions {dims} ({} expected)",
                voxels.len(),
                dims.len()
            )));
        }
        Ok(GrayVolume { dims, voxels })
    }

    pub fn filled(dims: Dims, value: u8) -> Self {
        GrayVolume {
            dims,
            voxels: vec![value; dims.len()],
        }
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> u8) -> Self {
        let mut voxels = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    voxels.push(f(x, y, z));
                }
            }
        }
        GrayVolume { dims, voxels }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxels(&self) -> &[u8] {
        &self.voxels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.voxels[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: u8) {
        let i = self.dims.index(x, y, z);
        self.voxels[i] = value;
    }

    /// Copies slices `z0..z1` into a new volume.
    pub fn slab(&self, z0: usize, z1: usize) -> GrayVolume {
        let s = self.dims.slice_len();
        GrayVolume {
            dims: self.dims.with_nz(z1 - z0),
            voxels: self.voxels[z0 * s..z1 * s].to_vec(),
        }
    }

    pub fn to_real(&self) -> RealVolume {
        RealVolume {
            dims: self.dims,
            data: self.voxels.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

/// Real-valued volume produced by the filters.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVolume {
    pub dims: Dims,
    pub data: Vec<f64>,
}

impl RealVolume {
    pub fn zeros(dims: Dims) -> Self {
        RealVolume {
            dims,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.dims.index(x, y, z)]
    }
}

/// Per-voxel class ids; 0 means unlabeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVolume {
    dims: Dims,
    labels: Vec<ClassId>,
}

impl LabelVolume {
    pub fn new(dims: Dims, labels: Vec<ClassId>) -> Result<Self> {
        if labels.len() != dims.len() {
            return Err(Error::SizeMismatch(format!(
                "{} labels for dimensions {dims} ({} expected)",
                labels.len(),
                dims.len()
            )));
        }
        Ok(LabelVolume { dims, labels })
    }

    pub fn unlabeled(dims: Dims) -> Self {
        LabelVolume {
            dims,
            labels: vec![0; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [ClassId] {
        &mut self.labels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> ClassId {
        self.labels[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, label: ClassId) {
        let i = self.dims.index(x, y, z);
        self.labels[i] = label;
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    /// Checks that every nonzero label names a catalog entry.
    pub fn validate(&self, catalog: &ClassCatalog) -> Result<()> {
        let k = catalog.len();
        match self.labels.iter().find(|&&l| usize::from(l) > k) {
            Some(&bad) => Err(Error::UnknownLabel(format!(
                "class id {bad} (catalog has {k} classes)"
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: ClassId,
    pub name: String,
    pub color: [u8; 3],
}

/// Ordered class list with ids `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCatalog {
    entries: Vec<ClassEntry>,
}

impl ClassCatalog {
    pub fn new(entries: Vec<ClassEntry>) -> Result<Self> {
        if entries.len() > usize::from(ClassId::MAX) {
            return Err(Error::InvalidParameter("more than 255 classes".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if usize::from(e.id) != i + 1 {
                return Err(Error::InvalidParameter(format!(
                    "class ids must be contiguous from 1; entry {i} has id {}",
                    e.id
                )));
            }
            if entries[..i].iter().any(|o| o.name == e.name) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate class name {:?}",
                    e.name
                )));
            }
        }
        Ok(ClassCatalog { entries })
    }

    /// Builds a catalog from names, assigning ids in order and a fixed palette.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        const PALETTE: [[u8; 3]; 10] = [
            [230, 25, 75],
            [60, 180, 75],
            [255, 225, 25],
            [0, 130, 200],
            [245, 130, 48],
            [145, 30, 180],
            [70, 240, 240],
            [240, 50, 230],
            [210, 245, 60],
            [250, 190, 212],
        ];
        let entries = names
            .iter()
            .enumerate()
            .map(|(i, n)| ClassEntry {
                id: (i + 1) as ClassId,
                name: n.as_ref().to_string(),
                color: PALETTE[i % PALETTE.len()],
            })
            .collect();
        ClassCatalog::new(entries)
    }

    /// The five micro-CT rock classes used by the phantom generator and the
    /// segmentation pipeline.
    pub fn rock() -> Self {
        let e = |id, name: &str, color| ClassEntry {
            id,
            name: name.to_string(),
            color,
        };
        ClassCatalog {
            entries: vec![
                e(1, "Isolated Bioclast", [0, 200, 0]),
                e(2, "Carbonate Cement", [240, 220, 0]),
                e(3, "Intragranular Connected Vugs & Mini-Fractures", [150, 50, 200]),
                e(4, "Pyrite", [30, 80, 240]),
                e(5, "Intergranular Pore", [90, 90, 90]),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn get(&self, id: ClassId) -> Option<&ClassEntry> {
        id.checked_sub(1).and_then(|i| self.entries.get(usize::from(i)))
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn name_of(&self, id: ClassId) -> Option<&str> {
        self.get(id).map(|e| e.name.as_str())
    }

    /// Appends a class with the next free id and returns that id.
    pub fn push(&mut self, name: &str) -> Result<ClassId> {
        let mut names: Vec<String> = self.entries.iter().map(|e| e.name.clone()).collect();
        names.push(name.to_string());
        let mut grown = ClassCatalog::from_names(&names)?;
        // keep existing colors
        for (new, old) in grown.entries.iter_mut().zip(&self.entries) {
            new.color = old.color;
        }
        *self = grown;
        Ok(self.entries.len() as ClassId)
    }
}
