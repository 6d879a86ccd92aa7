//! Binary PGM (P5) and PPM (P6) slices, maxval 255.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::volume::{ClassCatalog, Dims, GrayVolume, LabelVolume};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ppm {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB.
    pub pixels: Vec<u8>,
}

fn header(magic: &str, width: usize, height: usize) -> Vec<u8> {
    format!("{magic}\n{width} {height}\n255\n").into_bytes()
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    debug_assert_eq!(pixels.len(), width * height);
    let mut out = header("P5", width, height);
    out.extend_from_slice(pixels);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    debug_assert_eq!(rgb.len(), 3 * width * height);
    let mut out = header("P6", width, height);
    out.extend_from_slice(rgb);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses the `magic width height maxval` header; returns the fields and the
/// offset of the first payload byte.
fn parse_header(bytes: &[u8], path: &Path) -> Result<(String, usize, usize, usize, usize)> {
    let mut tokens = Vec::with_capacity(4);
    let mut i = 0;
    while tokens.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
            i += 1;
        }
        if start == i {
            return Err(Error::format(path, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates maxval from the raster
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return Err(Error::format(path, "missing separator after maxval"));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(path, format!("bad header field {s:?}")))
    };
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    Ok((tokens[0].clone(), w, h, maxval, i + 1))
}

fn read_pnm(path: &Path, magic: &str, channels: usize) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (m, w, h, maxval, offset) = parse_header(&bytes, path)?;
    if m != magic {
        return Err(Error::format(path, format!("expected {magic}, found {m}")));
    }
    if maxval != 255 {
        return Err(Error::format(path, format!("maxval must be 255, found {maxval}")));
    }
    if w == 0 || h == 0 {
        return Err(Error::format(path, "zero-sized image"));
    }
    let need = w * h * channels;
    let payload = &bytes[offset..];
    if payload.len() < need {
        return Err(Error::format(
            path,
            format!("raster has {} bytes, expected {need}", payload.len()),
        ));
    }
    Ok((w, h, payload[..need].to_vec()))
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    let (width, height, pixels) = read_pnm(path, "P5", 1)?;
    Ok(Pgm {
        width,
        height,
        pixels,
    })
}

pub fn read_ppm(path: &Path) -> Result<Ppm> {
    let (width, height, pixels) = read_pnm(path, "P6", 3)?;
    Ok(Ppm {
        width,
        height,
        pixels,
    })
}

/// Trailing run of digits in a file stem, e.g. `slice_0012` -> 12.
fn slice_index(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .take_while(char::is_ascii_digit)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

/// Slice files in `dir` with the given extension whose names start with `prefix`,
/// ordered by their numeric index.
fn list_slices(dir: &Path, prefix: &str, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let matches_ext = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case(ext));
        if path.is_file() && matches_ext && name.starts_with(prefix) {
            let idx = slice_index(&path).ok_or_else(|| {
                Error::format(&path, "slice file name carries no numeric index")
            })?;
            found.push((idx, path));
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn stack_from_slices(paths: &[PathBuf], dir: &Path) -> Result<(Dims, Vec<u8>)> {
    if paths.is_empty() {
        return Err(Error::Empty(format!("no PGM slices in {}", dir.display())));
    }
    let first = read_pgm(&paths[0])?;
    let (w, h) = (first.width, first.height);
    let mut data = Vec::with_capacity(w * h * paths.len());
    data.extend_from_slice(&first.pixels);
    for p in &paths[1..] {
        let s = read_pgm(p)?;
        if (s.width, s.height) != (w, h) {
            return Err(Error::SizeMismatch(format!(
                "{} is {}x{}, first slice is {w}x{h}",
                p.display(),
                s.width,
                s.height
            )));
        }
        data.extend_from_slice(&s.pixels);
    }
    Ok((Dims::new(w, h, paths.len())?, data))
}

/// Reads every `*.pgm` in `dir` as one z-slice, in index order.
pub fn load_pgm_stack(dir: &Path) -> Result<GrayVolume> {
    let paths = list_slices(dir, "", "pgm")?;
    let (dims, data) = stack_from_slices(&paths, dir)?;
    GrayVolume::new(dims, data)
}

fn pad_width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(4)
}

/// Writes `slice_NNNN.pgm` files, one per z.
pub fn save_pgm_stack(volume: &GrayVolume, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let d = volume.dims();
    let width = pad_width(d.nz);
    for (z, slice) in volume.voxels().chunks_exact(d.slice_len()).enumerate() {
        let p = dir.join(format!("slice_{z:0width$}.pgm"));
        write_pgm(&p, d.nx, d.ny, slice)?;
    }
    Ok(())
}

/// Writes `labels_NNNN.pgm` (class ids) and `color_NNNN.ppm` (catalog colors,
/// unlabeled voxels black) per slice, plus `catalog.json`.
pub fn save_label_stack(labels: &LabelVolume, catalog: &ClassCatalog, dir: &Path) -> Result<()> {
    labels.validate(catalog)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let d = labels.dims();
    let width = pad_width(d.nz);
    let mut palette = vec![[0u8; 3]; 256];
    for e in catalog.entries() {
        palette[usize::from(e.id)] = e.color;
    }
    let mut rgb = vec![0u8; 3 * d.slice_len()];
    for (z, slice) in labels.labels().chunks_exact(d.slice_len()).enumerate() {
        write_pgm(&dir.join(format!("labels_{z:0width$}.pgm")), d.nx, d.ny, slice)?;
        for (px, &l) in rgb.chunks_exact_mut(3).zip(slice) {
            px.copy_from_slice(&palette[usize::from(l)]);
        }
        write_ppm(&dir.join(format!("color_{z:0width$}.ppm")), d.nx, d.ny, &rgb)?;
    }
    super::save_catalog(catalog, &dir.join("catalog.json"))
}

/// Reads the class-id slices written by [`save_label_stack`].
pub fn load_label_stack(dir: &Path, catalog: &ClassCatalog) -> Result<LabelVolume> {
    let paths = list_slices(dir, "labels_", "pgm")?;
    let (dims, data) = stack_from_slices(&paths, dir)?;
    let lv = LabelVolume::new(dims, data)?;
    lv.validate(catalog)?;
    Ok(lv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_header_with_comment() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 9]);
        std::fs::write(&p, bytes).unwrap();
        let img = read_pgm(&p).unwrap();
        assert_eq!((img.width, img.height), (2, 1));
        assert_eq!(img.pixels, vec![7, 9]);
    }

    #[test]
    fn rejects_ascii_and_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        std::fs::write(&p, b"P2\n1 1\n255\n0\n").unwrap();
        assert!(read_pgm(&p).is_err());
        std::fs::write(&p, b"P5\n1 1\n65535\n\0\0").unwrap();
        assert!(read_pgm(&p).is_err());
    }

    #[test]
    fn single_slice_stack() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(&dir.path().join("s_0000.pgm"), 3, 2, &[1, 2, 3, 4, 5, 6]).unwrap();
        let v = load_pgm_stack(dir.path()).unwrap();
        assert_eq!(v.dims(), Dims::new(3, 2, 1).unwrap());
        assert_eq!(v.get(2, 1, 0), 6);
    }

    #[test]
    fn mismatched_slices_and_empty_dir() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_pgm_stack(dir.path()), Err(Error::Empty(_))));
        write_pgm(&dir.path().join("s_0000.pgm"), 2, 2, &[0; 4]).unwrap();
        write_pgm(&dir.path().join("s_0001.pgm"), 3, 2, &[0; 6]).unwrap();
        assert!(matches!(load_pgm_stack(dir.path()), Err(Error::SizeMismatch(_))));
    }

    #[test]
    fn slices_sorted_numerically() {
        let dir = tempfile::tempdir().unwrap();
        for z in [10u8, 2, 1] {
            write_pgm(&dir.path().join(format!("s_{z}.pgm")), 1, 1, &[z]).unwrap();
        }
        let v = load_pgm_stack(dir.path()).unwrap();
        assert_eq!(v.voxels(), &[1, 2, 10]);
    }

    #[test]
    fn twenty_slices_of_256() {
        let dir = tempfile::tempdir().unwrap();
        let d = Dims::new(256, 256, 20).unwrap();
        let v = GrayVolume::from_fn(d, |x, y, z| (x ^ y ^ z) as u8);
        save_pgm_stack(&v, dir.path()).unwrap();
        let back = load_pgm_stack(dir.path()).unwrap();
        assert_eq!(back.dims(), d);
        assert_eq!(back, v);
    }

    #[test]
    fn label_stack_colors() {
        let dir = tempfile::tempdir().unwrap();
        let cat = ClassCatalog::rock();
        let d = Dims::new(4, 3, 2).unwrap();
        save_label_stack(&LabelVolume::unlabeled(d), &cat, dir.path()).unwrap();
        let c = read_ppm(&dir.path().join("color_0001.ppm")).unwrap();
        assert!(c.pixels.iter().all(|&b| b == 0));

        let dir2 = tempfile::tempdir().unwrap();
        let lv = LabelVolume::new(d, vec![4; d.len()]).unwrap();
        save_label_stack(&lv, &cat, dir2.path()).unwrap();
        let c = read_ppm(&dir2.path().join("color_0000.ppm")).unwrap();
        for px in c.pixels.chunks_exact(3) {
            assert_eq!(px, cat.get(4).unwrap().color);
        }
        assert_eq!(load_label_stack(dir2.path(), &cat).unwrap(), lv);
    }

    #[test]
    fn label_outside_catalog_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let d = Dims::new(2, 2, 1).unwrap();
        let lv = LabelVolume::new(d, vec![0, 1, 2, 6]).unwrap();
        assert!(save_label_stack(&lv, &ClassCatalog::rock(), dir.path()).is_err());
    }
}
