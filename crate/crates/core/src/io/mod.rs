//! File formats: RAW volumes with JSON sidecars, PGM/PPM slice stacks,
//! CSV datasets and MNIST IDX files.

mod idx;
mod pnm;
mod raw;
mod table;

pub use idx::{load_idx, load_idx_images, load_idx_labels};
pub use pnm::{
    load_label_stack, load_pgm_stack, read_pgm, read_ppm, save_label_stack, save_pgm_stack,
    write_pgm, write_ppm, Pgm, Ppm,
};
pub use raw::{load_raw_volume, save_raw_volume, sidecar_path, RawSidecar};
pub use table::{load_csv_dataset, save_csv_dataset};

use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{ClassCatalog, GrayVolume};

/// Loads a volume from a `.raw` file (with sidecar) or a directory of PGM slices.
pub fn load_volume(path: &Path) -> Result<GrayVolume> {
    if path.is_dir() {
        load_pgm_stack(path)
    } else {
        load_raw_volume(path)
    }
}

pub fn save_catalog(catalog: &ClassCatalog, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(catalog)
        .map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_catalog(path: &Path) -> Result<ClassCatalog> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: ClassCatalog =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    // re-validate through the constructor
    ClassCatalog::new(raw.entries().to_vec())
}
