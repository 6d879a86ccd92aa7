//! MNIST IDX files (big-endian, magic 0x00000803 for images, 0x00000801 for labels).

use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::volume::ClassId;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(path, "truncated IDX header"))
}

/// Returns `(count, rows, cols, pixels)`.
pub fn load_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(
            path,
            format!("image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let need = n * rows * cols;
    let payload = &bytes[16..];
    if payload.len() != need {
        return Err(Error::format(
            path,
            format!("{} pixel bytes, header implies {need}", payload.len()),
        ));
    }
    Ok((n, rows, cols, payload.to_vec()))
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(
            path,
            format!("label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let payload = &bytes[8..];
    if payload.len() != n {
        return Err(Error::format(
            path,
            format!("{} label bytes, header declares {n}", payload.len()),
        ));
    }
    Ok(payload.to_vec())
}

/// One row per image with pixels scaled to `[0, 1]`; labels are digit + 1.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (n, rows, cols, pixels) = load_idx_images(images_path)?;
    let digits = load_idx_labels(labels_path)?;
    if digits.len() != n {
        return Err(Error::SizeMismatch(format!(
            "{n} images but {} labels",
            digits.len()
        )));
    }
    if let Some(&d) = digits.iter().find(|&&d| d > 9) {
        return Err(Error::format(labels_path, format!("label {d} is not a digit")));
    }
    let names = (0..rows * cols).map(|i| format!("px{i}")).collect();
    let values = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels = digits.iter().map(|&d| d as ClassId + 1).collect();
    Dataset::new(names, values, Some(labels))
}
