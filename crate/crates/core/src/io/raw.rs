use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, GrayVolume};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dtype: String,
    pub order: String,
}

impl RawSidecar {
    pub fn for_dims(dims: Dims) -> Self {
        RawSidecar {
            nx: dims.nx,
            ny: dims.ny,
            nz: dims.nz,
            dtype: "u8".into(),
            order: "x-fastest".into(),
        }
    }
}

/// `volume.raw` -> `volume.raw.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn load_raw_volume(path: &Path) -> Result<GrayVolume> {
    let meta_path = sidecar_path(path);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: RawSidecar =
        serde_json::from_str(&text).map_err(|e| Error::format(&meta_path, e.to_string()))?;
    if meta.dtype != "u8" {
        return Err(Error::format(
            &meta_path,
            format!("unsupported dtype {:?}", meta.dtype),
        ));
    }
    if meta.order != "x-fastest" {
        return Err(Error::format(
            &meta_path,
            format!("unsupported order {:?}", meta.order),
        ));
    }
    let dims = Dims::new(meta.nx, meta.ny, meta.nz)
        .map_err(|e| Error::format(&meta_path, e.to_string()))?;
    let payload = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if payload.len() != dims.len() {
        return Err(Error::SizeMismatch(format!(
            "{}: payload has {} bytes, sidecar declares {dims} = {}",
            path.display(),
            payload.len(),
            dims.len()
        )));
    }
    GrayVolume::new(dims, payload)
}

pub fn save_raw_volume(volume: &GrayVolume, path: &Path) -> Result<()> {
    std::fs::write(path, volume.voxels()).map_err(|e| Error::io(path, e))?;
    let meta_path = sidecar_path(path);
    let text = serde_json::to_string(&RawSidecar::for_dims(volume.dims()))
        .map_err(|e| Error::format(&meta_path, e.to_string()))?;
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
}
